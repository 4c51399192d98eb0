#include "prmix/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

#include "prmix/error.hpp"

namespace prmix {
namespace {

// Already-normalised inputs within this distance of 1 are left untouched,
// which makes normalize idempotent bit for bit.
constexpr double kUnitMassSlack = 1e-13;
constexpr double kDensityTolerance = 1e-10;

double parse_double(std::string_view text, std::string_view what) {
    std::string buffer(text);
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(buffer, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != buffer.size() || !std::isfinite(value)) {
        throw Error(ErrorCode::parse,
                    "cannot parse " + std::string(what) + " from '" + buffer + "'");
    }
    return value;
}

}  // namespace

QuadratureRule parse_rule(std::string_view name) {
    if (name == "midpoint") return QuadratureRule::midpoint;
    if (name == "trapezoid") return QuadratureRule::trapezoid;
    if (name == "log" || name == "log-midpoint") return QuadratureRule::log_midpoint;
    throw Error(ErrorCode::config, "unknown quadrature rule '" + std::string(name) + "'");
}

std::string_view to_string(QuadratureRule rule) noexcept {
    switch (rule) {
        case QuadratureRule::midpoint: return "midpoint";
        case QuadratureRule::trapezoid: return "trapezoid";
        case QuadratureRule::log_midpoint: return "log-midpoint";
    }
    return "midpoint";
}

MixingGrid MixingGrid::build(double lower, double upper, std::size_t m,
                             QuadratureRule rule, std::vector<double> atoms) {
    if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
        throw Error(ErrorCode::invalid_grid, "grid bounds must satisfy lower < upper");
    }
    if (m == 0) {
        throw Error(ErrorCode::invalid_grid, "grid needs at least one continuous node");
    }
    if (rule == QuadratureRule::trapezoid && m < 2) {
        throw Error(ErrorCode::invalid_grid, "trapezoid rule needs at least two nodes");
    }
    if (rule == QuadratureRule::log_midpoint && !(lower > 0.0)) {
        throw Error(ErrorCode::invalid_grid, "log-spaced grid needs a positive lower bound");
    }

    std::vector<double> cont_nodes(m);
    std::vector<double> cont_weights(m);
    const double width = upper - lower;
    switch (rule) {
        case QuadratureRule::midpoint: {
            const double h = width / static_cast<double>(m);
            for (std::size_t j = 0; j < m; ++j) {
                cont_nodes[j] = lower + (static_cast<double>(j) + 0.5) * h;
                cont_weights[j] = h;
            }
            break;
        }
        case QuadratureRule::trapezoid: {
            const double h = width / static_cast<double>(m - 1);
            for (std::size_t j = 0; j < m; ++j) {
                cont_nodes[j] = lower + static_cast<double>(j) * h;
                cont_weights[j] = (j == 0 || j + 1 == m) ? 0.5 * h : h;
            }
            cont_nodes.back() = upper;
            break;
        }
        case QuadratureRule::log_midpoint: {
            const double log_lo = std::log(lower);
            const double h = (std::log(upper) - log_lo) / static_cast<double>(m);
            double left = lower;
            for (std::size_t j = 0; j < m; ++j) {
                const double right =
                    (j + 1 == m) ? upper : std::exp(log_lo + static_cast<double>(j + 1) * h);
                cont_nodes[j] = std::exp(log_lo + (static_cast<double>(j) + 0.5) * h);
                cont_weights[j] = right - left;
                left = right;
            }
            break;
        }
    }

    std::sort(atoms.begin(), atoms.end());
    for (std::size_t a = 0; a < atoms.size(); ++a) {
        if (!std::isfinite(atoms[a])) {
            throw Error(ErrorCode::invalid_grid, "atom locations must be finite");
        }
        if (a > 0 && atoms[a] == atoms[a - 1]) {
            throw Error(ErrorCode::invalid_grid, "duplicate atom at " + std::to_string(atoms[a]));
        }
    }

    MixingGrid grid;
    grid.lower_ = lower;
    grid.upper_ = upper;
    grid.rule_ = rule;
    grid.continuous_count_ = m;
    grid.nodes_.reserve(m + atoms.size());
    grid.weights_.reserve(m + atoms.size());
    grid.is_atom_.reserve(m + atoms.size());
    std::size_t j = 0;
    std::size_t a = 0;
    while (j < m || a < atoms.size()) {
        if (a == atoms.size() || (j < m && cont_nodes[j] <= atoms[a])) {
            grid.nodes_.push_back(cont_nodes[j]);
            grid.weights_.push_back(cont_weights[j]);
            grid.is_atom_.push_back(false);
            ++j;
        } else {
            grid.nodes_.push_back(atoms[a]);
            grid.weights_.push_back(1.0);
            grid.is_atom_.push_back(true);
            ++a;
        }
    }
    return grid;
}

MixingGrid MixingGrid::discrete(std::vector<double> atoms) {
    if (atoms.empty()) {
        throw Error(ErrorCode::invalid_grid, "discrete grid needs at least one atom");
    }
    std::sort(atoms.begin(), atoms.end());
    for (std::size_t a = 0; a < atoms.size(); ++a) {
        if (!std::isfinite(atoms[a])) {
            throw Error(ErrorCode::invalid_grid, "atom locations must be finite");
        }
        if (a > 0 && atoms[a] == atoms[a - 1]) {
            throw Error(ErrorCode::invalid_grid, "duplicate atom at " + std::to_string(atoms[a]));
        }
    }
    MixingGrid grid;
    grid.lower_ = atoms.front();
    grid.upper_ = atoms.back();
    grid.nodes_ = std::move(atoms);
    grid.weights_.assign(grid.nodes_.size(), 1.0);
    grid.is_atom_.assign(grid.nodes_.size(), true);
    return grid;
}

std::vector<std::size_t> MixingGrid::atom_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) {
        if (is_atom_[i]) out.push_back(i);
    }
    return out;
}

double MixingGrid::total_measure() const noexcept {
    const double atoms = static_cast<double>(size() - continuous_count_);
    return continuous_count_ > 0 ? (upper_ - lower_) + atoms : atoms;
}

GridPtr build_grid(double lower, double upper, std::size_t m, QuadratureRule rule,
                   std::vector<double> atoms) {
    return std::make_shared<const MixingGrid>(
        MixingGrid::build(lower, upper, m, rule, std::move(atoms)));
}

GridSpec parse_grid_spec(std::string_view text) {
    GridSpec spec;
    std::string_view head = text;
    std::string_view tail;
    if (const auto plus = text.find('+'); plus != std::string_view::npos) {
        head = text.substr(0, plus);
        tail = text.substr(plus + 1);
    }

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= head.size(); ++i) {
        if (i == head.size() || head[i] == ':') {
            fields.push_back(head.substr(start, i - start));
            start = i + 1;
        }
    }
    if (fields.size() != 3) {
        throw Error(ErrorCode::parse, "grid spec must look like lo:hi:m[+atom@x,...], got '" +
                                          std::string(text) + "'");
    }
    spec.lower = parse_double(fields[0], "grid lower bound");
    spec.upper = parse_double(fields[1], "grid upper bound");
    std::size_t m = 0;
    const auto* first = fields[2].data();
    const auto* last = first + fields[2].size();
    if (auto [ptr, ec] = std::from_chars(first, last, m); ec != std::errc{} || ptr != last) {
        throw Error(ErrorCode::parse, "grid node count must be a nonnegative integer");
    }
    spec.m = m;

    // Accepts "atom@a,atom@b", "atom@a,b" and "atom@a+atom@b".
    std::size_t pos = 0;
    while (pos < tail.size()) {
        std::size_t end = tail.find_first_of(",+", pos);
        if (end == std::string_view::npos) end = tail.size();
        std::string_view item = tail.substr(pos, end - pos);
        if (item.starts_with("atom@")) item.remove_prefix(5);
        if (item.empty()) throw Error(ErrorCode::parse, "empty atom in grid spec");
        spec.atoms.push_back(parse_double(item, "atom location"));
        pos = end + 1;
    }
    return spec;
}

GridPtr build_grid(const GridSpec& spec, QuadratureRule rule) {
    return build_grid(spec.lower, spec.upper, spec.m, rule, spec.atoms);
}

double integrate(const MixingGrid& grid, std::span<const double> values) {
    if (values.size() != grid.size()) {
        throw Error(ErrorCode::shape, "expected " + std::to_string(grid.size()) +
                                          " values, got " + std::to_string(values.size()));
    }
    // Neumaier compensated sum.
    double sum = 0.0;
    double carry = 0.0;
    const auto w = grid.weights();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double term = values[i] * w[i];
        const double t = sum + term;
        if (std::abs(sum) >= std::abs(term)) {
            carry += (sum - t) + term;
        } else {
            carry += (term - t) + sum;
        }
        sum = t;
    }
    return sum + carry;
}

MixingDensity::MixingDensity(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw Error(ErrorCode::invalid_grid, "density needs a grid");
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorCode::degenerate_density, "density values must be finite and >= 0");
        }
    }
    const double total = integrate(*grid_, values_);
    if (std::abs(total - 1.0) > kDensityTolerance) {
        throw Error(ErrorCode::degenerate_density,
                    "density integrates to " + std::to_string(total) + ", not 1");
    }
}

MixingDensity MixingDensity::uniform(GridPtr grid) {
    if (!grid) throw Error(ErrorCode::invalid_grid, "density needs a grid");
    std::vector<double> values(grid->size(), 1.0);
    return normalize(std::move(grid), std::move(values));
}

MixingDensity MixingDensity::point_mass(GridPtr grid, std::size_t index) {
    if (!grid) throw Error(ErrorCode::invalid_grid, "density needs a grid");
    if (index >= grid->size()) throw Error(ErrorCode::shape, "point mass index out of range");
    std::vector<double> values(grid->size(), 0.0);
    values[index] = 1.0 / grid->weight(index);
    return MixingDensity(std::move(grid), std::move(values), Trusted{});
}

void normalize_in_place(const MixingGrid& grid, std::span<double> values) {
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorCode::degenerate_density, "density values must be finite and >= 0");
        }
    }
    const double total = integrate(grid, values);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw Error(ErrorCode::degenerate_density, "cannot normalise a density with zero mass");
    }
    if (std::abs(total - 1.0) <= kUnitMassSlack) return;
    const double scale = 1.0 / total;
    for (double& v : values) v *= scale;
}

MixingDensity normalize(GridPtr grid, std::vector<double> values) {
    if (!grid) throw Error(ErrorCode::invalid_grid, "density needs a grid");
    normalize_in_place(*grid, values);
    return MixingDensity(std::move(grid), std::move(values), MixingDensity::Trusted{});
}

}  // namespace prmix
