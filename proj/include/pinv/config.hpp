#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pinv/asymptotics.hpp"
#include "pinv/fkoracle.hpp"

namespace pinv {

/// One dictionary entry as written in a config.  `poly` is
/// (1 - r^2)^power t^tilt with r = |x - center| / half_width and t the first
/// coordinate of (x - center) / half_width; `plateau` is plateau_bump;
/// `dyadic` expands to interior_dictionary(max_level, alpha).
struct DictionarySpec {
    std::string kind = "poly";
    std::string id;
    Point center{0.5, 0.5};
    double half_width = 0.45;
    int power = 4;
    int tilt = 0;
    double transition = 0.1;
    int max_level = 1;
    double alpha = 0.0;  // 0 means default_alpha(d)
};

struct TruthSpec {
    std::string kind = "bump";  // bump | constant | coefficients | prior_draw
    double amplitude = 0.25;    // bump: phi0 = amplitude (1 - r^2)^power
    Point center{0.5, 0.5};
    double half_width = 0.4;
    int power = 4;
    double value = 1.0;         // constant: f0 = value
    std::string file;           // coefficients: CoefficientTree file, phi0 = synthesize
    std::uint64_t seed = 0;     // prior_draw
};

struct BoundarySpec {
    std::string kind = "constant";  // constant | linear
    double value = 1.0;
    Point slope{0.0, 0.0};          // linear: g = value + slope . x
};

struct OracleSpec {
    std::size_t paths = 100000;
    std::size_t probes = 5;
    double dt = 0.0;
    std::size_t max_steps = 10000000;
    std::string exit = "bridge";  // bridge | clip
};

/// Three broad polynomial bumps about the centre (half-widths 0.45, 0.45,
/// 0.40; tilt 0, 1, 0).
std::vector<DictionarySpec> default_dictionary();

/// Every numeric default of the CLI lives in the member initialisers here
/// and in the structs above; the README reproduces the table.
struct ExperimentConfig {
    std::string name = "experiment";
    int dim = 1;
    int grid_level = 7;
    double prior_amplitude = 1.0;
    int prior_smoothness = 3;
    std::optional<int> prior_level;  // empty: level rule per eps
    int basis_level = -1;            // -1: grid_level - 3
    int wavelet_order = 6;
    TruthSpec truth;
    BoundarySpec boundary;
    double eps = 0.025;
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    std::size_t replications = 10;
    McmcParams mcmc;
    std::vector<DictionarySpec> dictionary = default_dictionary();
    std::optional<DictionarySpec> ball = DictionarySpec{"dyadic", "", {0.5, 0.5}, 0.45, 4, 0, 0.1, 1, 0.0};
    double beta = 0.1;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t prior_samples = 10;
    OracleSpec oracle;
    std::string output = "pinv-out";

    /// Builds every object once to surface module preconditions as ConfigError.
    void validate() const;
};

/// Parses JSON text.  A manifest written by the CLI is accepted as well: its
/// "config" member is used.  Errors raise ConfigError naming the field.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved config as pretty JSON; config_json(parse_config(config_json(c)))
/// reproduces the text.
std::string config_json(const ExperimentConfig& cfg);

Grid make_grid(const ExperimentConfig& cfg);
WaveletBasis make_basis(const ExperimentConfig& cfg);
PriorConfig make_prior(const ExperimentConfig& cfg, int level);
GridFunction make_truth(const ExperimentConfig& cfg, const WaveletBasis& basis);
GridFunction make_boundary(const ExperimentConfig& cfg, const Grid& grid);
std::vector<TestFunction> make_dictionary(const std::vector<DictionarySpec>& specs, const Grid& grid);
PathConfig make_path_config(const ExperimentConfig& cfg);
ExperimentSetup make_setup(const ExperimentConfig& cfg);

}  // namespace pinv
