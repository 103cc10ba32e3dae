#include "fbsde/config.hpp"

#include <fstream>
#include <sstream>

namespace fbsde {

namespace {

using nlohmann::ordered_json;

std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key '" + it.key() + "'", path);
    }
}

double require_number(const ordered_json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) throw ConfigError(std::string("missing key '") + key + "'", path);
    if (!obj[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number", path);
    return obj[key].get<double>();
}

// A time curve is a plain number (constant) or {"c0": a, "c1": b} meaning
// a + b t.
struct Curve {
    double c0 = 0.0;
    double c1 = 0.0;
    std::function<double(double)> fn() const {
        const double a = c0, b = c1;
        return [a, b](double t) { return a + b * t; };
    }
};

Curve parse_curve(const ordered_json& v, const std::string& path) {
    Curve c;
    if (v.is_number()) {
        c.c0 = v.get<double>();
        return c;
    }
    if (!v.is_object()) throw ConfigError("expected number or {c0, c1}", path);
    check_keys(v, {"c0", "c1"}, path);
    c.c0 = require_number(v, "c0", path);
    if (v.contains("c1")) c.c1 = require_number(v, "c1", path);
    return c;
}

}  // namespace

RunSetup load_config_text(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(e.what(), line_column(text, e.byte));
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object", "/");
    check_keys(doc, {"model", "grid", "jumps", "controls", "horizon", "sense", "x0", "mc"}, "/");

    if (!doc.contains("model") || !doc["model"].is_object())
        throw ConfigError("missing 'model' object", "/");
    const auto& model = doc["model"];
    check_keys(model, {"name", "b", "sigma", "utility"}, "/model");
    if (!model.contains("name") || !model["name"].is_string())
        throw ConfigError("model needs a 'name' string", "/model");
    const std::string name = model["name"].get<std::string>();
    if (name != "merton-log" && name != "riskmin")
        throw ConfigError("unknown model '" + name + "' (expected merton-log or riskmin)",
                          "/model/name");

    const double T = doc.contains("horizon") ? require_number(doc, "horizon", "/") : 1.0;
    if (!(T > 0.0)) throw ConfigError("horizon nonpositive", "/horizon");
    const double x0 = doc.contains("x0") ? require_number(doc, "x0", "/") : 1.0;

    Curve b{name == "merton-log" ? 0.05 : 0.2, 0.0};
    Curve sigma{name == "merton-log" ? 0.2 : 0.4, 0.0};
    if (model.contains("b")) b = parse_curve(model["b"], "/model/b");
    if (model.contains("sigma")) sigma = parse_curve(model["sigma"], "/model/sigma");

    RunSetup setup;
    setup.problem_name = name;
    setup.params.b = b.fn();
    setup.params.sigma = sigma.fn();
    setup.params.T = T;
    setup.params.x0 = x0;
    if (model.contains("utility")) {
        if (!model["utility"].is_string() || model["utility"] != "log")
            throw ConfigError("only 'log' utility is selectable by name", "/model/utility");
    }

    setup.spec = name == "merton-log" ? build_merton(setup.params) : build_riskmin(setup.params);

    if (doc.contains("sense")) {
        const auto& s = doc["sense"];
        if (!s.is_string() || (s != "maximize" && s != "minimize"))
            throw ConfigError("sense must be 'maximize' or 'minimize'", "/sense");
        setup.spec.sense = s == "maximize" ? Sense::maximize : Sense::minimize;
    }

    if (doc.contains("jumps")) {
        const auto& jumps = doc["jumps"];
        check_keys(jumps, {"atoms"}, "/jumps");
        std::vector<JumpAtom> atoms;
        if (jumps.contains("atoms")) {
            if (!jumps["atoms"].is_array()) throw ConfigError("'atoms' must be an array", "/jumps");
            for (std::size_t i = 0; i < jumps["atoms"].size(); ++i) {
                const auto& a = jumps["atoms"][i];
                const std::string path = "/jumps/atoms/" + std::to_string(i);
                check_keys(a, {"zeta", "weight"}, path);
                atoms.push_back({require_number(a, "zeta", path), require_number(a, "weight", path)});
            }
        }
        setup.spec.jumps = JumpMeasure::from_atoms(std::move(atoms));
    }

    if (doc.contains("controls")) {
        const auto& controls = doc["controls"];
        check_keys(controls, {"lo", "hi", "resolution", "values"}, "/controls");
        if (controls.contains("values")) {
            if (!controls["values"].is_array())
                throw ConfigError("'values' must be an array", "/controls");
            std::vector<double> vals;
            for (const auto& v : controls["values"]) vals.push_back(v.get<double>());
            setup.spec.controls = ControlSet::make_finite(std::move(vals));
        } else {
            setup.spec.controls = ControlSet::make_interval(
                require_number(controls, "lo", "/controls"),
                require_number(controls, "hi", "/controls"),
                controls.contains("resolution") ? require_number(controls, "resolution", "/controls")
                                                : 0.01);
        }
    }

    std::size_t nx = 200;
    std::size_t nt = name == "merton-log" ? 8000 : 400;
    std::optional<double> x_min, x_max;
    if (doc.contains("grid")) {
        const auto& grid = doc["grid"];
        check_keys(grid, {"x_min", "x_max", "nx", "nt"}, "/grid");
        if (grid.contains("nx")) nx = grid["nx"].get<std::size_t>();
        if (grid.contains("nt")) nt = grid["nt"].get<std::size_t>();
        if (grid.contains("x_min")) x_min = require_number(grid, "x_min", "/grid");
        if (grid.contains("x_max")) x_max = require_number(grid, "x_max", "/grid");
    }
    if (x_min && x_max) {
        setup.grid = SpaceTimeGrid::uniform(T, nt, *x_min, *x_max, nx);
    } else {
        setup.grid = name == "merton-log" ? merton_default_grid(setup.params, nx, nt)
                                          : riskmin_default_grid(setup.params, nx, nt);
    }

    if (doc.contains("mc")) {
        const auto& mc = doc["mc"];
        check_keys(mc, {"n_paths", "dt", "seed"}, "/mc");
        if (mc.contains("n_paths")) setup.mc.n_paths = mc["n_paths"].get<std::size_t>();
        if (mc.contains("dt")) setup.mc.dt = require_number(mc, "dt", "/mc");
        if (mc.contains("seed")) setup.mc.seed = mc["seed"].get<std::uint64_t>();
    }

    setup.resolved = {
        {"model",
         {{"name", name},
          {"b", {{"c0", b.c0}, {"c1", b.c1}}},
          {"sigma", {{"c0", sigma.c0}, {"c1", sigma.c1}}}}},
        {"horizon", T},
        {"x0", x0},
        {"sense", setup.spec.sense == Sense::maximize ? "maximize" : "minimize"},
        {"grid",
         {{"x_min", setup.grid.x_nodes.front()},
          {"x_max", setup.grid.x_nodes.back()},
          {"nx", setup.grid.nx()},
          {"nt", setup.grid.nt() - 1}}},
        {"mc", {{"n_paths", setup.mc.n_paths}, {"dt", setup.mc.dt}, {"seed", setup.mc.seed}}}};
    if (!setup.spec.jumps.empty()) {
        ordered_json atoms = ordered_json::array();
        for (const auto& a : setup.spec.jumps.atoms)
            atoms.push_back({{"zeta", a.zeta}, {"weight", a.weight}});
        setup.resolved["jumps"] = {{"atoms", atoms}};
    }
    return setup;
}

RunSetup load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config_text(ss.str());
}

RunSetup make_setup(const std::string& problem_name, double T, double b0, double b1, double sigma,
                    double x0, const McConfig& mc, std::optional<std::size_t> nx,
                    std::optional<std::size_t> nt) {
    ordered_json doc = {
        {"model", {{"name", problem_name}, {"b", {{"c0", b0}, {"c1", b1}}}, {"sigma", sigma}}},
        {"horizon", T},
        {"x0", x0},
        {"mc", {{"n_paths", mc.n_paths}, {"dt", mc.dt}, {"seed", mc.seed}}}};
    if (nx || nt) {
        ordered_json grid = ordered_json::object();
        if (nx) grid["nx"] = *nx;
        if (nt) grid["nt"] = *nt;
        doc["grid"] = grid;
    }
    return load_config_text(doc.dump());
}

}  // namespace fbsde
