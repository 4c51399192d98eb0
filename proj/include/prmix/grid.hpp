#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prmix {

enum class QuadratureRule {
    midpoint,      ///< m equal cells, node at each cell centre
    trapezoid,     ///< m equally spaced nodes including both endpoints
    log_midpoint,  ///< m cells equal in log(u), node at the geometric centre
};

QuadratureRule parse_rule(std::string_view name);
std::string_view to_string(QuadratureRule rule) noexcept;

/**
 * Discretised latent domain together with its dominating measure.
 *
 * Continuous nodes carry quadrature weights for Lebesgue measure on
 * [lower, upper]; atoms carry counting-measure mass 1.  Nodes are stored in
 * increasing order of location; an atom sharing a location with a continuous
 * node is placed after it.  Immutable once built.
 */
class MixingGrid {
public:
    static MixingGrid build(double lower, double upper, std::size_t m,
                            QuadratureRule rule = QuadratureRule::midpoint,
                            std::vector<double> atoms = {});

    /// Grid made only of atoms (no continuous part).
    static MixingGrid discrete(std::vector<double> atoms);

    std::size_t size() const noexcept { return nodes_.size(); }
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }
    double node(std::size_t i) const { return nodes_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    bool is_atom(std::size_t i) const { return is_atom_[i]; }
    std::vector<std::size_t> atom_indices() const;
    std::size_t continuous_size() const noexcept { return continuous_count_; }

    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    QuadratureRule rule() const noexcept { return rule_; }
    /// nu(U): interval length of the continuous part plus the number of atoms.
    double total_measure() const noexcept;

private:
    MixingGrid() = default;

    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<bool> is_atom_;
    std::size_t continuous_count_ = 0;
    double lower_ = 0.0;
    double upper_ = 0.0;
    QuadratureRule rule_ = QuadratureRule::midpoint;
};

using GridPtr = std::shared_ptr<const MixingGrid>;

GridPtr build_grid(double lower, double upper, std::size_t m,
                   QuadratureRule rule = QuadratureRule::midpoint,
                   std::vector<double> atoms = {});

/// Parsed form of "lo:hi:m[+atom@x,...]".
struct GridSpec {
    double lower = 0.0;
    double upper = 1.0;
    std::size_t m = 400;
    std::vector<double> atoms;
};

GridSpec parse_grid_spec(std::string_view text);
GridPtr build_grid(const GridSpec& spec, QuadratureRule rule = QuadratureRule::midpoint);

/// Sum of values times node weights (compensated summation).
double integrate(const MixingGrid& grid, std::span<const double> values);

/// Nonnegative values on a grid integrating to one against its measure.
class MixingDensity {
public:
    /// Validates that `values` are finite, nonnegative and integrate to 1
    /// within 1e-10.
    MixingDensity(GridPtr grid, std::vector<double> values);

    static MixingDensity uniform(GridPtr grid);
    /// Unit mass concentrated on node `index`.
    static MixingDensity point_mass(GridPtr grid, std::size_t index);

    const MixingGrid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const noexcept { return values_.size(); }

    /// Probability mass carried by node i, value times node weight.
    double mass(std::size_t i) const { return values_[i] * grid_->weight(i); }

private:
    struct Trusted {};
    MixingDensity(GridPtr grid, std::vector<double> values, Trusted)
        : grid_(std::move(grid)), values_(std::move(values)) {}

    friend MixingDensity normalize(GridPtr grid, std::vector<double> values);

    GridPtr grid_;
    std::vector<double> values_;
};

/// Rescales nonnegative values by one positive constant so they integrate to
/// one.  Input already normalised to rounding precision is returned unchanged.
MixingDensity normalize(GridPtr grid, std::vector<double> values);

/// Same, in place, for hot loops that keep raw per-node buffers.
void normalize_in_place(const MixingGrid& grid, std::span<double> values);

}  // namespace prmix
