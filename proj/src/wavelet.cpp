#include "pinv/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "pinv/error.hpp"

namespace pinv {

namespace {

// Reconstruction lowpass taps of the Daubechies family, db2 .. db10.
const std::map<int, std::vector<double>>& daubechies_table() {
    static const std::map<int, std::vector<double>> table = {
        {2, {0.48296291314453416, 0.83651630373780794, 0.22414386804201339, -0.12940952255126037}},
        {3, {0.33267055295008263, 0.80689150931109255, 0.45987750211849154, -0.13501102001025458,
             -0.085441273882026658, 0.035226291885709533}},
        {4, {0.23037781330889651, 0.71484657055291567, 0.63088076792985892, -0.027983769416859854,
             -0.18703481171909309, 0.030841381835560764, 0.032883011666885197, -0.010597401785069032}},
        {5, {0.16010239797419293, 0.60382926979718965, 0.72430852843777294, 0.13842814590132074,
             -0.24229488706638203, -0.032244869584638375, 0.077571493840045719, -0.0062414902127982744,
             -0.012580751999081999, 0.0033357252854737712}},
        {6, {0.11154074335010947, 0.49462389039845306, 0.75113390802109536, 0.31525035170919763,
             -0.22626469396543983, -0.12976686756726194, 0.097501605587323043, 0.027522865530305727,
             -0.03158203931748603, 0.00055384220116149613, 0.0047772575109455108, -0.0010773010853084796}},
        {7, {0.077852054085009184, 0.39653931948191729, 0.72913209084623509, 0.46978228740519312,
             -0.14390600392856498, -0.22403618499387498, 0.071309219266830259, 0.080612609151083078,
             -0.038029936935014413, -0.016574541630666881, 0.01255099855609984, 0.00042957797292136651,
             -0.0018016407040474908, 0.00035371379997452024}},
        {8, {0.054415842243104008, 0.31287159091429995, 0.67563073629728976, 0.58535468365420673,
             -0.015829105256349306, -0.28401554296154691, 0.00047248457391328279, 0.12874742662047847,
             -0.017369301001807547, -0.044088253930794755, 0.013981027917398282, 0.0087460940474057766,
             -0.0048703529934515741, -0.00039174037337694705, 0.00067544940645056933, -0.00011747678412476953}},
        {9, {0.038077947363878345, 0.24383467461259034, 0.60482312369011115, 0.65728807805130052,
             0.13319738582500756, -0.29327378327917492, -0.096840783222976456, 0.14854074933810638,
             0.03072568147933338, -0.067632829061329974, 0.00025094711483145197, 0.022361662123679096,
             -0.0047232047577513972, -0.0042815036824634303, 0.0018476468830562265, 0.00023038576352319597,
             -0.00025196318894271012, 3.9347320316271603e-05}},
        {10, {0.026670057900555554, 0.1881768000776915, 0.52720118893172563, 0.68845903945360354,
              0.28117234366057747, -0.24984642432731538, -0.19594627437737705, 0.12736934033579325,
              0.093057364603572348, -0.071394147166397082, -0.029457536821875813, 0.033212674059341002,
              0.0036065535669561697, -0.010733175483330575, 0.0013953517470529011, 0.0019924052951850561,
              -0.00068585669495971162, -0.00011646685512928545, 9.3588670320069592e-05,
              -1.3264202894521244e-05}},
    };
    return table;
}

}  // namespace

DaubechiesFilter::DaubechiesFilter(int order) : order_(order) {
    const auto& table = daubechies_table();
    const auto it = table.find(order);
    if (it == table.end()) throw InvalidArgument("no Daubechies filter with " + std::to_string(order) + " vanishing moments");
    low_ = it->second;
    const std::size_t len = low_.size();
    high_.resize(len);
    for (std::size_t m = 0; m < len; ++m) high_[m] = ((m % 2 == 0) ? 1.0 : -1.0) * low_[len - 1 - m];
}

std::vector<int> DaubechiesFilter::available_orders() {
    std::vector<int> orders;
    for (const auto& [order, taps] : daubechies_table()) orders.push_back(order);
    return orders;
}

CoefficientTree::CoefficientTree(int dim, int max_level) : dim_(dim), max_level_(max_level) {
    if (dim != 1 && dim != 2) throw InvalidArgument("coefficient tree dimension must be 1 or 2");
    if (max_level < -1) throw InvalidArgument("coefficient tree max level must be >= -1");
    data_.assign(offset(max_level + 1), 0.0);
}

std::size_t CoefficientTree::level_count(int dim, int level) {
    if (level < 0) return 1;
    const std::size_t per_axis = std::size_t{1} << level;
    return dim == 1 ? per_axis : 3 * per_axis * per_axis;
}

std::size_t CoefficientTree::offset(int level) const {
    // levels -1..level-1 precede `level`; their counts sum to 2^{level d}
    if (level < 0) return 0;
    return std::size_t{1} << (level * dim_);
}

std::span<double> CoefficientTree::level(int l) {
    if (l < -1 || l > max_level_) throw InvalidArgument("coefficient level " + std::to_string(l) + " out of range");
    return std::span<double>(data_).subspan(offset(l), count(l));
}

std::span<const double> CoefficientTree::level(int l) const {
    if (l < -1 || l > max_level_) throw InvalidArgument("coefficient level " + std::to_string(l) + " out of range");
    return std::span<const double>(data_).subspan(offset(l), count(l));
}

CoefficientTree CoefficientTree::from_flat(int dim, int max_level, std::span<const double> values) {
    CoefficientTree tree(dim, max_level);
    if (values.size() != tree.size()) {
        throw InvalidArgument("coefficient array has " + std::to_string(values.size()) + " entries, expected " +
                              std::to_string(tree.size()));
    }
    std::copy(values.begin(), values.end(), tree.data_.begin());
    return tree;
}

int CoefficientTree::level_of(std::size_t flat_index) const {
    for (int l = -1; l <= max_level_; ++l) {
        if (flat_index < offset(l + 1)) return l;
    }
    throw InvalidArgument("flat coefficient index out of range");
}

double CoefficientTree::dot(const CoefficientTree& other) const {
    if (dim_ != other.dim_ || max_level_ != other.max_level_) throw InvalidArgument("coefficient tree shape mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < data_.size(); ++k) s += data_[k] * other.data_[k];
    return s;
}

WaveletBasis::WaveletBasis(Grid grid, int max_level, int filter_order)
    : grid_(std::move(grid)), max_level_(max_level), filter_(filter_order) {
    if (max_level < -1) throw InvalidArgument("wavelet max level must be >= -1");
    if (max_level > grid_.level() - 3) {
        throw InvalidArgument("wavelet max level " + std::to_string(max_level) + " needs grid level >= " +
                              std::to_string(max_level + 3));
    }
}

void WaveletBasis::forward_1d(std::span<double> data, std::size_t n, std::size_t stride,
                              std::vector<double>& scratch) const {
    const auto lo = filter_.lowpass();
    const auto hi = filter_.highpass();
    const std::size_t half = n / 2;
    scratch.assign(n, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
        double a = 0.0;
        double d = 0.0;
        for (std::size_t m = 0; m < lo.size(); ++m) {
            const double x = data[((2 * k + m) % n) * stride];
            a += lo[m] * x;
            d += hi[m] * x;
        }
        scratch[k] = a;
        scratch[half + k] = d;
    }
    for (std::size_t k = 0; k < n; ++k) data[k * stride] = scratch[k];
}

void WaveletBasis::inverse_1d(std::span<double> data, std::size_t n, std::size_t stride,
                              std::vector<double>& scratch) const {
    const auto lo = filter_.lowpass();
    const auto hi = filter_.highpass();
    const std::size_t half = n / 2;
    scratch.assign(n, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
        const double a = data[k * stride];
        const double d = data[(half + k) * stride];
        if (a == 0.0 && d == 0.0) continue;
        for (std::size_t m = 0; m < lo.size(); ++m) scratch[(2 * k + m) % n] += lo[m] * a + hi[m] * d;
    }
    for (std::size_t k = 0; k < n; ++k) data[k * stride] = scratch[k];
}

std::vector<double> WaveletBasis::to_periodic(const GridFunction& a) const {
    const std::size_t n = static_cast<std::size_t>(grid_.cells_per_axis());
    const double scale = std::sqrt(grid_.cell_volume());
    std::vector<double> p(dim() == 1 ? n : n * n);
    if (dim() == 1) {
        for (std::size_t i = 0; i < n; ++i) p[i] = a[grid_.node(static_cast<int>(i))] * scale;
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                p[i + n * j] = a[grid_.node(static_cast<int>(i), static_cast<int>(j))] * scale;
            }
        }
    }
    return p;
}

GridFunction WaveletBasis::from_periodic(const std::vector<double>& p) const {
    const int n = grid_.cells_per_axis();
    const double scale = 1.0 / std::sqrt(grid_.cell_volume());
    GridFunction out(grid_);
    if (dim() == 1) {
        for (int i = 0; i <= n; ++i) out[grid_.node(i)] = p[static_cast<std::size_t>(i % n)] * scale;
    } else {
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= n; ++i) {
                out[grid_.node(i, j)] = p[static_cast<std::size_t>(i % n + n * (j % n))] * scale;
            }
        }
    }
    return out;
}

namespace {

// Position of coefficient (level, r) inside the in-place transformed array.
std::size_t packed_index(int dim, std::size_t n, int level, std::size_t r) {
    if (level < 0) return 0;
    const std::size_t side = std::size_t{1} << level;
    if (dim == 1) return side + r;
    const std::size_t per_orientation = side * side;
    const std::size_t orientation = r / per_orientation;
    const std::size_t pos = r % per_orientation;
    std::size_t i = pos % side;
    std::size_t j = pos / side;
    if (orientation == 0 || orientation == 2) i += side;
    if (orientation == 1 || orientation == 2) j += side;
    return i + n * j;
}

}  // namespace

CoefficientTree WaveletBasis::analyze(const GridFunction& a) const {
    if (!(a.grid() == grid_)) throw InvalidArgument("analyze: grid mismatch");
    std::vector<double> p = to_periodic(a);
    const std::size_t n = static_cast<std::size_t>(grid_.cells_per_axis());
    std::vector<double> scratch;
    std::span<double> data(p);
    for (std::size_t size = n; size >= 2; size /= 2) {
        if (dim() == 1) {
            forward_1d(data, size, 1, scratch);
        } else {
            for (std::size_t j = 0; j < size; ++j) forward_1d(data.subspan(j * n), size, 1, scratch);
            for (std::size_t i = 0; i < size; ++i) forward_1d(data.subspan(i), size, n, scratch);
        }
    }
    CoefficientTree tree(dim(), max_level_);
    for (int l = -1; l <= max_level_; ++l) {
        auto level = tree.level(l);
        for (std::size_t r = 0; r < level.size(); ++r) level[r] = p[packed_index(dim(), n, l, r)];
    }
    return tree;
}

GridFunction WaveletBasis::synthesize(const CoefficientTree& c) const {
    if (c.dim() != dim()) throw InvalidArgument("synthesize: dimension mismatch");
    if (c.max_level() > max_level_) {
        throw InvalidArgument("synthesize: tree level " + std::to_string(c.max_level()) + " exceeds basis level " +
                              std::to_string(max_level_));
    }
    const std::size_t n = static_cast<std::size_t>(grid_.cells_per_axis());
    std::vector<double> p(dim() == 1 ? n : n * n, 0.0);
    for (int l = -1; l <= c.max_level(); ++l) {
        const auto level = c.level(l);
        for (std::size_t r = 0; r < level.size(); ++r) p[packed_index(dim(), n, l, r)] = level[r];
    }
    std::vector<double> scratch;
    std::span<double> data(p);
    for (std::size_t size = 2; size <= n; size *= 2) {
        if (dim() == 1) {
            inverse_1d(data, size, 1, scratch);
        } else {
            for (std::size_t i = 0; i < size; ++i) inverse_1d(data.subspan(i), size, n, scratch);
            for (std::size_t j = 0; j < size; ++j) inverse_1d(data.subspan(j * n), size, 1, scratch);
        }
    }
    return from_periodic(p);
}

GridFunction WaveletBasis::atom(int level, std::size_t r) const {
    CoefficientTree tree(dim(), std::max(level, max_level_));
    tree.at(level, r) = 1.0;
    if (level > max_level_) {
        WaveletBasis wider(grid_, level, filter_.order());
        return wider.synthesize(tree);
    }
    return synthesize(tree);
}

double WaveletBasis::overlap_constant(int level) const {
    const std::size_t n = static_cast<std::size_t>(grid_.cells_per_axis());
    if (level < 0) return 1.0 / std::sqrt(grid_.domain().volume());
    const std::size_t side = std::size_t{1} << level;
    const std::size_t shift = n / side;
    const std::size_t orientations = dim() == 1 ? 1 : 3;
    const std::size_t per_orientation = dim() == 1 ? side : side * side;
    std::vector<double> folded(dim() == 1 ? shift : shift * shift, 0.0);
    for (std::size_t o = 0; o < orientations; ++o) {
        const GridFunction a = atom(level, o * per_orientation);
        if (dim() == 1) {
            for (std::size_t i = 0; i < n; ++i) folded[i % shift] += std::abs(a[grid_.node(static_cast<int>(i))]);
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < n; ++i) {
                    folded[i % shift + shift * (j % shift)] +=
                        std::abs(a[grid_.node(static_cast<int>(i), static_cast<int>(j))]);
                }
            }
        }
    }
    return *std::max_element(folded.begin(), folded.end());
}

double periodic_inner(const GridFunction& a, const GridFunction& b) {
    if (!(a.grid() == b.grid())) throw InvalidArgument("periodic_inner: grid mismatch");
    const Grid& g = a.grid();
    const int n = g.cells_per_axis();
    double sum = 0.0;
    if (g.dim() == 1) {
        for (int i = 0; i < n; ++i) sum += a[g.node(i)] * b[g.node(i)];
    } else {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) sum += a[g.node(i, j)] * b[g.node(i, j)];
        }
    }
    return g.cell_volume() * sum;
}

void PriorConfig::validate() const {
    if (!(amplitude > 0.0)) throw InvalidArgument("prior amplitude B must be positive");
    if (smoothness < 1) throw InvalidArgument("prior smoothness s must be >= 1");
    if (max_level < 0) throw InvalidArgument("prior truncation level J must be >= 0");
}

double PriorConfig::box(int level, int dim) const {
    const double lbar = std::max(level, 1);
    return amplitude * std::exp2(-level * (smoothness + 0.5 * dim)) / (lbar * lbar);
}

int level_rule(double eps, int smoothness, int dim, int grid_level) {
    if (!(eps > 0.0)) throw InvalidArgument("level_rule: eps must be positive");
    const int j = static_cast<int>(std::lround(-2.0 * std::log2(eps) / (2.0 * smoothness + 4.0 + dim)));
    return std::clamp(j, 1, std::max(1, grid_level - 3));
}

PriorDraw sample_prior(const PriorConfig& cfg, const WaveletBasis& basis, std::uint64_t seed) {
    cfg.validate();
    if (cfg.max_level > basis.max_level()) throw InvalidArgument("sample_prior: prior level exceeds basis level");
    std::mt19937_64 rng(seed);
    CoefficientTree tree(basis.dim(), cfg.max_level);
    for (int l = -1; l <= cfg.max_level; ++l) {
        const double a = cfg.box(l, basis.dim());
        std::uniform_real_distribution<double> uniform(-a, a);
        for (double& b : tree.level(l)) b = uniform(rng);
    }
    GridFunction f = basis.synthesize(tree).map([](double phi) { return std::exp(phi); });
    return {std::move(tree), std::move(f)};
}

double prior_sup_bound(const PriorConfig& cfg, const WaveletBasis& basis) {
    double bound = 0.0;
    for (int l = -1; l <= cfg.max_level; ++l) bound += cfg.box(l, basis.dim()) * basis.overlap_constant(l);
    return bound;
}

double interior_point_margin(const CoefficientTree& c, const PriorConfig& cfg) {
    double worst = 0.0;
    for (int l = -1; l <= c.max_level(); ++l) {
        const double a = cfg.box(l, c.dim());
        for (double b : c.level(l)) worst = std::max(worst, std::abs(b) / a);
    }
    return cfg.amplitude * (1.0 - worst);
}

bool inside_prior_box(const CoefficientTree& c, const PriorConfig& cfg) {
    if (c.max_level() > cfg.max_level) {
        for (int l = cfg.max_level + 1; l <= c.max_level(); ++l) {
            for (double b : c.level(l)) {
                if (b != 0.0) return false;
            }
        }
    }
    for (int l = -1; l <= std::min(c.max_level(), cfg.max_level); ++l) {
        const double a = cfg.box(l, c.dim());
        for (double b : c.level(l)) {
            if (std::abs(b) > a) return false;
        }
    }
    return true;
}

}  // namespace pinv
