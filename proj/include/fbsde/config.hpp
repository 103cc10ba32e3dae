#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "fbsde/benchmarks.hpp"
#include "fbsde/model.hpp"

namespace fbsde {

// Thrown for malformed configuration; `where` carries line/column for parse
// errors and a JSON pointer path for schema errors.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& message, const std::string& where)
        : std::runtime_error(message + " (" + where + ")"), location(where) {}
    std::string location;
};

struct McConfig {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 42;
};

// A fully resolved run setup: problem, market parameters, grid, MC settings,
// plus the resolved JSON for embedding in outputs.
struct RunSetup {
    std::string problem_name;  // "merton-log" or "riskmin"
    MarketParams params;
    ProblemSpec spec;
    SpaceTimeGrid grid;
    McConfig mc;
    nlohmann::ordered_json resolved;
};

// Parses and validates a configuration document. Unknown keys are rejected.
RunSetup load_config_text(const std::string& text);
RunSetup load_config_file(const std::string& path);

// Programmatic setup used by the CLI flag path; `b1` adds a linear-in-time
// drift component b(t) = b0 + b1 t.
RunSetup make_setup(const std::string& problem_name, double T, double b0, double b1, double sigma,
                    double x0, const McConfig& mc,
                    std::optional<std::size_t> nx = std::nullopt,
                    std::optional<std::size_t> nt = std::nullopt);

}  // namespace fbsde
