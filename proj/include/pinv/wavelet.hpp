#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pinv/grid.hpp"

namespace pinv {

/// Orthonormal Daubechies filter pair with `order` vanishing moments.
class DaubechiesFilter {
public:
    explicit DaubechiesFilter(int order);

    int order() const { return order_; }
    std::span<const double> lowpass() const { return low_; }
    std::span<const double> highpass() const { return high_; }

    static std::vector<int> available_orders();

private:
    int order_;
    std::vector<double> low_;
    std::vector<double> high_;
};

/// Multilevel coefficient array.  Level -1 holds the single scaling
/// coefficient; level l >= 0 holds (2^d - 1) * 2^{ld} detail coefficients,
/// ordered orientation-major then row-major in position.
class CoefficientTree {
public:
    CoefficientTree(int dim, int max_level);

    int dim() const { return dim_; }
    int max_level() const { return max_level_; }
    static std::size_t level_count(int dim, int level);
    std::size_t count(int level) const { return level_count(dim_, level); }
    std::size_t size() const { return data_.size(); }
    /// Offset of `level` in the flat level-ordered array.
    std::size_t offset(int level) const;

    std::span<double> level(int l);
    std::span<const double> level(int l) const;
    double& at(int l, std::size_t r) { return level(l)[r]; }
    double at(int l, std::size_t r) const { return level(l)[r]; }

    std::span<const double> flat() const { return data_; }
    std::span<double> flat() { return data_; }
    static CoefficientTree from_flat(int dim, int max_level, std::span<const double> values);

    /// Level of the coefficient at a flat index.
    int level_of(std::size_t flat_index) const;

    double dot(const CoefficientTree& other) const;
    bool operator==(const CoefficientTree&) const = default;

private:
    int dim_;
    int max_level_;
    std::vector<double> data_;
};

/// Periodized orthonormal tensor wavelet basis sampled on a dyadic grid.
///
/// The transform acts on the 2^{Jg} nodes per axis with index < 2^{Jg}; the
/// node at the upper face repeats the node at the lower face.  Samples carry
/// the factor 1/sqrt(cell volume) so that synthesis is an isometry from
/// coefficients into the periodic midpoint quadrature (`periodic_inner`).
class WaveletBasis {
public:
    /// Default order is DaubechiesFilter order 6.
    WaveletBasis(Grid grid, int max_level, int filter_order = 6);

    const Grid& grid() const { return grid_; }
    int max_level() const { return max_level_; }
    int dim() const { return grid_.dim(); }
    const DaubechiesFilter& filter() const { return filter_; }

    CoefficientTree zero_tree() const { return CoefficientTree(dim(), max_level_); }

    GridFunction synthesize(const CoefficientTree& c) const;
    /// Forward transform truncated at max_level: the coefficients of the
    /// orthogonal projection onto V_J.
    CoefficientTree analyze(const GridFunction& a) const;

    /// Single atom Phi_{l,r} sampled on the grid.
    GridFunction atom(int level, std::size_t r) const;

    /// max_x sum_r |Phi_{l,r}(x)| for one level.
    double overlap_constant(int level) const;

private:
    void forward_1d(std::span<double> data, std::size_t n, std::size_t stride, std::vector<double>& scratch) const;
    void inverse_1d(std::span<double> data, std::size_t n, std::size_t stride, std::vector<double>& scratch) const;
    std::vector<double> to_periodic(const GridFunction& a) const;
    GridFunction from_periodic(const std::vector<double>& p) const;

    Grid grid_;
    int max_level_;
    DaubechiesFilter filter_;
};

/// Midpoint quadrature over the periodic node set the transform acts on
/// (nodes with every index below 2^{Jg}).  Agrees with l2_inner for fields
/// vanishing on the boundary.
double periodic_inner(const GridFunction& a, const GridFunction& b);

/// Uniform wavelet prior: b_{l,r} ~ U(-a_l, a_l) with
/// a_l = B 2^{-l(s+d/2)} / max(l,1)^2, truncated at level J.
struct PriorConfig {
    double amplitude = 1.0;  // B
    int smoothness = 3;      // s
    int max_level = 1;       // J

    void validate() const;
    /// Half-width a_l of the coefficient box at `level`.
    double box(int level, int dim) const;
};

/// Truncation level from the noise level: round(-2 log2(eps)/(2s+4+d)),
/// clamped to [1, grid_level - 3].
int level_rule(double eps, int smoothness, int dim, int grid_level);

struct PriorDraw {
    CoefficientTree coefficients;
    GridFunction potential;  // f = exp(synthesize(coefficients))
};

PriorDraw sample_prior(const PriorConfig& cfg, const WaveletBasis& basis, std::uint64_t seed);

/// Deterministic bound on sup|phi| over the prior support:
/// sum_l a_l * overlap_constant(l).
double prior_sup_bound(const PriorConfig& cfg, const WaveletBasis& basis);

/// B - max_{l,r} |b_{l,r}| * B / a_l; positive iff the tree lies strictly
/// inside every box.
double interior_point_margin(const CoefficientTree& c, const PriorConfig& cfg);

bool inside_prior_box(const CoefficientTree& c, const PriorConfig& cfg);

}  // namespace pinv
