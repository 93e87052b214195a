#include "pinv/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pinv/error.hpp"
#include "pinv/io.hpp"

namespace pinv {

using nlohmann::json;

std::vector<DictionarySpec> default_dictionary() {
    DictionarySpec a;
    a.id = "p0";
    DictionarySpec b = a;
    b.id = "p1";
    b.tilt = 1;
    DictionarySpec c = a;
    c.id = "p2";
    c.half_width = 0.4;
    return {a, b, c};
}

namespace {

// Walks a JSON object, remembering the key path for diagnostics and refusing
// keys nobody asked for.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    ~Reader() = default;

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& child(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    template <class T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = node_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key), "wrong type");
        }
    }

    void get_point(const std::string& key, Point& out) {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_array() || v.empty() || v.size() > 2) throw ConfigError(field(key), "expected 1 or 2 numbers");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(field(key), "expected numbers");
            out[i] = v[i].get<double>();
        }
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

DictionarySpec read_dictionary_spec(const json& node, const std::string& path) {
    Reader r(node, path);
    DictionarySpec d;
    r.get("kind", d.kind);
    r.get("id", d.id);
    r.get_point("center", d.center);
    r.get("half_width", d.half_width);
    r.get("power", d.power);
    r.get("tilt", d.tilt);
    r.get("transition", d.transition);
    r.get("max_level", d.max_level);
    r.get("alpha", d.alpha);
    r.finish();
    if (d.kind != "poly" && d.kind != "plateau" && d.kind != "dyadic") {
        throw ConfigError(path + ".kind", "expected poly, plateau or dyadic");
    }
    return d;
}

json write_dictionary_spec(const DictionarySpec& d) {
    json j = {{"kind", d.kind}};
    if (d.kind == "dyadic") {
        j["max_level"] = d.max_level;
        j["alpha"] = d.alpha;
        return j;
    }
    j["id"] = d.id;
    j["center"] = {d.center[0], d.center[1]};
    j["half_width"] = d.half_width;
    if (d.kind == "poly") {
        j["power"] = d.power;
        j["tilt"] = d.tilt;
    } else {
        j["transition"] = d.transition;
    }
    return j;
}

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) throw ConfigError(field, message);
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
    }
    if (root.is_object() && root.contains("tool") && root.contains("config")) root = json(root.at("config"));

    ExperimentConfig cfg;
    Reader r(root, "");
    r.get("name", cfg.name);
    r.get("dim", cfg.dim);
    r.get("grid_level", cfg.grid_level);
    r.get("eps", cfg.eps);
    r.get("eps_list", cfg.eps_list);
    r.get("replications", cfg.replications);
    r.get("beta", cfg.beta);
    r.get("seed", cfg.seed);
    r.get("threads", cfg.threads);
    r.get("prior_samples", cfg.prior_samples);
    r.get("output", cfg.output);
    if (r.has("prior")) {
        Reader p(r.child("prior"), "prior");
        p.get("amplitude", cfg.prior_amplitude);
        p.get("smoothness", cfg.prior_smoothness);
        if (p.has("level")) {
            const json& level = p.child("level");
            if (level.is_string() && level.get<std::string>() == "rule") {
                cfg.prior_level.reset();
            } else if (level.is_number_integer()) {
                cfg.prior_level = level.get<int>();
            } else {
                throw ConfigError("prior.level", "expected \"rule\" or an integer");
            }
        }
        p.get("basis_level", cfg.basis_level);
        p.get("wavelet_order", cfg.wavelet_order);
        p.finish();
    }
    if (r.has("truth")) {
        Reader t(r.child("truth"), "truth");
        t.get("kind", cfg.truth.kind);
        t.get("amplitude", cfg.truth.amplitude);
        t.get_point("center", cfg.truth.center);
        t.get("half_width", cfg.truth.half_width);
        t.get("power", cfg.truth.power);
        t.get("value", cfg.truth.value);
        t.get("file", cfg.truth.file);
        t.get("seed", cfg.truth.seed);
        t.finish();
    }
    if (r.has("boundary")) {
        Reader b(r.child("boundary"), "boundary");
        b.get("kind", cfg.boundary.kind);
        b.get("value", cfg.boundary.value);
        b.get_point("slope", cfg.boundary.slope);
        b.finish();
    }
    if (r.has("mcmc")) {
        Reader m(r.child("mcmc"), "mcmc");
        m.get("iterations", cfg.mcmc.iterations);
        m.get("burn_in_fraction", cfg.mcmc.burn_in_fraction);
        m.get("max_stored", cfg.mcmc.max_stored);
        m.get("step_scale", cfg.mcmc.step_scale);
        m.get("target_acceptance", cfg.mcmc.target_acceptance);
        m.get("adapt", cfg.mcmc.adapt);
        m.get("solver_tol", cfg.mcmc.solver_tol);
        m.finish();
    }
    if (r.has("dictionary")) {
        const json& list = r.child("dictionary");
        require(list.is_array() && !list.empty(), "dictionary", "expected a non-empty array");
        cfg.dictionary.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            cfg.dictionary.push_back(read_dictionary_spec(list[i], "dictionary[" + std::to_string(i) + "]"));
        }
    }
    if (r.has("ball")) {
        const json& ball = r.child("ball");
        if (ball.is_null()) {
            cfg.ball.reset();
        } else {
            cfg.ball = read_dictionary_spec(ball, "ball");
        }
    }
    if (r.has("oracle")) {
        Reader o(r.child("oracle"), "oracle");
        o.get("paths", cfg.oracle.paths);
        o.get("probes", cfg.oracle.probes);
        o.get("dt", cfg.oracle.dt);
        o.get("max_steps", cfg.oracle.max_steps);
        o.get("exit", cfg.oracle.exit);
        o.finish();
    }
    r.finish();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string config_json(const ExperimentConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["dim"] = cfg.dim;
    j["grid_level"] = cfg.grid_level;
    j["prior"] = {{"amplitude", cfg.prior_amplitude},
                  {"smoothness", cfg.prior_smoothness},
                  {"basis_level", cfg.basis_level},
                  {"wavelet_order", cfg.wavelet_order}};
    j["prior"]["level"] = cfg.prior_level ? json(*cfg.prior_level) : json("rule");
    j["truth"] = {{"kind", cfg.truth.kind},
                  {"amplitude", cfg.truth.amplitude},
                  {"center", {cfg.truth.center[0], cfg.truth.center[1]}},
                  {"half_width", cfg.truth.half_width},
                  {"power", cfg.truth.power},
                  {"value", cfg.truth.value},
                  {"file", cfg.truth.file},
                  {"seed", cfg.truth.seed}};
    j["boundary"] = {{"kind", cfg.boundary.kind},
                     {"value", cfg.boundary.value},
                     {"slope", {cfg.boundary.slope[0], cfg.boundary.slope[1]}}};
    j["eps"] = cfg.eps;
    j["eps_list"] = cfg.eps_list;
    j["replications"] = cfg.replications;
    j["mcmc"] = {{"iterations", cfg.mcmc.iterations},
                 {"burn_in_fraction", cfg.mcmc.burn_in_fraction},
                 {"max_stored", cfg.mcmc.max_stored},
                 {"step_scale", cfg.mcmc.step_scale},
                 {"target_acceptance", cfg.mcmc.target_acceptance},
                 {"adapt", cfg.mcmc.adapt},
                 {"solver_tol", cfg.mcmc.solver_tol}};
    j["dictionary"] = json::array();
    for (const auto& d : cfg.dictionary) j["dictionary"].push_back(write_dictionary_spec(d));
    j["ball"] = cfg.ball ? write_dictionary_spec(*cfg.ball) : json(nullptr);
    j["beta"] = cfg.beta;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["prior_samples"] = cfg.prior_samples;
    j["oracle"] = {{"paths", cfg.oracle.paths},
                   {"probes", cfg.oracle.probes},
                   {"dt", cfg.oracle.dt},
                   {"max_steps", cfg.oracle.max_steps},
                   {"exit", cfg.oracle.exit}};
    j["output"] = cfg.output;
    return j.dump(2);
}

Grid make_grid(const ExperimentConfig& cfg) { return Grid(Domain::unit(cfg.dim), cfg.grid_level); }

WaveletBasis make_basis(const ExperimentConfig& cfg) {
    const int level = cfg.basis_level >= 0 ? cfg.basis_level : cfg.grid_level - 3;
    return WaveletBasis(make_grid(cfg), level, cfg.wavelet_order);
}

PriorConfig make_prior(const ExperimentConfig& cfg, int level) {
    return {cfg.prior_amplitude, cfg.prior_smoothness, level};
}

GridFunction make_truth(const ExperimentConfig& cfg, const WaveletBasis& basis) {
    const Grid& grid = basis.grid();
    const TruthSpec& t = cfg.truth;
    if (t.kind == "constant") return GridFunction(grid, t.value);
    GridFunction phi(grid);
    if (t.kind == "bump") {
        phi = GridFunction::sample(grid, [&](const Point& x) {
            double r2 = 0.0;
            for (int a = 0; a < grid.dim(); ++a) r2 += (x[a] - t.center[a]) * (x[a] - t.center[a]);
            r2 /= t.half_width * t.half_width;
            return r2 < 1.0 ? t.amplitude * std::pow(1.0 - r2, t.power) : 0.0;
        });
    } else if (t.kind == "coefficients") {
        const CoefficientTree c = read_coefficients(t.file);
        if (c.dim() != grid.dim() || c.max_level() > basis.max_level()) {
            throw ConfigError("truth.file", "coefficient tree does not fit the basis");
        }
        CoefficientTree full = basis.zero_tree();
        for (int l = -1; l <= c.max_level(); ++l) {
            for (std::size_t r = 0; r < c.count(l); ++r) full.at(l, r) = c.at(l, r);
        }
        phi = basis.synthesize(full);
    } else if (t.kind == "prior_draw") {
        const int level = cfg.prior_level.value_or(std::min(1, basis.max_level()));
        phi = basis.synthesize(sample_prior(make_prior(cfg, level), basis, t.seed).coefficients);
    } else {
        throw ConfigError("truth.kind", "expected bump, constant, coefficients or prior_draw");
    }
    return phi.map([](double v) { return std::exp(v); });
}

GridFunction make_boundary(const ExperimentConfig& cfg, const Grid& grid) {
    const BoundarySpec& b = cfg.boundary;
    if (b.kind == "constant") return boundary_field(grid, [&](const Point&) { return b.value; });
    if (b.kind == "linear") {
        return boundary_field(grid, [&](const Point& x) { return b.value + b.slope[0] * x[0] + b.slope[1] * x[1]; });
    }
    throw ConfigError("boundary.kind", "expected constant or linear");
}

std::vector<TestFunction> make_dictionary(const std::vector<DictionarySpec>& specs, const Grid& grid) {
    std::vector<TestFunction> out;
    for (const auto& d : specs) {
        if (d.kind == "dyadic") {
            const auto family = interior_dictionary(grid, d.max_level, d.alpha > 0.0 ? d.alpha : default_alpha(grid.dim()));
            out.insert(out.end(), family.begin(), family.end());
        } else if (d.kind == "plateau") {
            out.push_back({d.id, plateau_bump(grid, d.center, d.half_width, d.transition), 1.0});
        } else {
            out.push_back({d.id, GridFunction::sample(grid, [&](const Point& x) {
                               double r2 = 0.0;
                               for (int a = 0; a < grid.dim(); ++a) {
                                   r2 += (x[a] - d.center[a]) * (x[a] - d.center[a]);
                               }
                               r2 /= d.half_width * d.half_width;
                               const double t = (x[0] - d.center[0]) / d.half_width;
                               return r2 < 1.0 ? std::pow(1.0 - r2, d.power) * std::pow(t, d.tilt) : 0.0;
                           }),
                           1.0});
        }
    }
    return out;
}

PathConfig make_path_config(const ExperimentConfig& cfg) {
    PathConfig p;
    p.paths = cfg.oracle.paths;
    p.dt = cfg.oracle.dt;
    p.max_steps = cfg.oracle.max_steps;
    p.seed = cfg.seed;
    p.threads = cfg.threads;
    p.exit = cfg.oracle.exit == "clip" ? ExitScheme::kClip : ExitScheme::kBridge;
    return p;
}

ExperimentSetup make_setup(const ExperimentConfig& cfg) {
    WaveletBasis basis = make_basis(cfg);
    const Grid grid = basis.grid();
    ExperimentSetup s{cfg.name,
                      basis,
                      make_prior(cfg, cfg.prior_level.value_or(1)),
                      !cfg.prior_level.has_value(),
                      make_truth(cfg, basis),
                      make_boundary(cfg, grid),
                      make_dictionary(cfg.dictionary, grid),
                      cfg.ball ? make_dictionary({*cfg.ball}, grid) : std::vector<TestFunction>{},
                      cfg.mcmc,
                      cfg.beta,
                      cfg.seed,
                      cfg.threads};
    return s;
}

void ExperimentConfig::validate() const {
    require(!name.empty() && name.find_first_of(",\n\"") == std::string::npos, "name",
            "must be non-empty without commas, quotes or newlines");
    require(dim == 1 || dim == 2, "dim", "must be 1 or 2");
    require(grid_level >= 4 && grid_level <= (dim == 1 ? 16 : 10), "grid_level", "out of range");
    require(prior_amplitude > 0.0 && std::isfinite(prior_amplitude), "prior.amplitude", "must be positive");
    require(prior_smoothness >= 1, "prior.smoothness", "must be a positive integer");
    const int basis = basis_level >= 0 ? basis_level : grid_level - 3;
    require(basis >= 0 && basis <= grid_level - 3, "prior.basis_level", "must lie in [0, grid_level - 3]");
    require(!prior_level || (*prior_level >= 0 && *prior_level <= basis), "prior.level",
            "must lie in [0, basis_level]");
    const auto orders = DaubechiesFilter::available_orders();
    require(std::find(orders.begin(), orders.end(), wavelet_order) != orders.end(), "prior.wavelet_order",
            "no Daubechies filter with that many vanishing moments");
    require(eps > 0.0 && std::isfinite(eps), "eps", "must be positive");
    require(!eps_list.empty(), "eps_list", "must not be empty");
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        require(eps_list[k] > 0.0, "eps_list[" + std::to_string(k) + "]", "must be positive");
        if (k > 0) require(eps_list[k] < eps_list[k - 1], "eps_list", "must be strictly decreasing");
    }
    require(replications >= 1, "replications", "must be positive");
    require(beta > 0.0 && beta < 1.0, "beta", "must lie in (0, 1)");
    require(threads >= 1, "threads", "must be positive");
    require(prior_samples >= 1, "prior_samples", "must be positive");
    require(!output.empty(), "output", "must not be empty");
    require(oracle.exit == "bridge" || oracle.exit == "clip", "oracle.exit", "expected bridge or clip");
    require(truth.kind != "bump" || (truth.half_width > 0.0 && truth.power >= 1), "truth",
            "bump needs half_width > 0 and power >= 1");
    require(truth.kind != "constant" || truth.value >= 0.0, "truth.value", "must be non-negative");
    try {
        mcmc.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("mcmc", e.what());
    }
    try {
        make_path_config(*this).validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError("oracle", e.what());
    }

    const WaveletBasis b = make_basis(*this);
    const Grid& grid = b.grid();
    const GridFunction g = make_boundary(*this, grid);
    require(boundary_min(g) > 0.0, "boundary", "boundary data must be positive");
    try {
        (void)PotentialField::from_values(make_truth(*this, b));
    } catch (const InvalidArgument& e) {
        throw ConfigError("truth", e.what());
    }
    for (std::size_t i = 0; i < dictionary.size(); ++i) {
        const std::string field = "dictionary[" + std::to_string(i) + "]";
        const auto& d = dictionary[i];
        require(d.kind == "dyadic" || !d.id.empty(), field + ".id", "must not be empty");
        require(d.kind == "dyadic" || d.half_width > 0.0, field + ".half_width", "must be positive");
        const auto members = make_dictionary({d}, grid);
        require(!members.empty(), field, "no member vanishes near the boundary");
        for (const auto& t : members) {
            require(vanishes_near_boundary(t.psi), field, "test function touches the boundary margin");
            require(l2_norm(t.psi) > 0.0, field, "test function vanishes on the grid");
        }
    }
    std::set<std::string> ids;
    for (const auto& t : make_dictionary(dictionary, grid)) {
        require(ids.insert(t.id).second, "dictionary", "duplicate id " + t.id);
    }
    if (ball) {
        for (const auto& t : make_dictionary({*ball}, grid)) {
            require(vanishes_near_boundary(t.psi), "ball", "test function touches the boundary margin");
        }
    }
}

}  // namespace pinv
