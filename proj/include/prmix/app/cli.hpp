#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prmix/app/artifacts.hpp"
#include "prmix/grid.hpp"
#include "prmix/kernels.hpp"

namespace prmix::app {

enum ExitStatus : int { exit_ok = 0, exit_usage = 1, exit_numerical = 2 };

/// Fully resolved settings of one CLI run; serialised into every artifact.
struct RunConfig {
    std::string command;

    std::string input;
    std::string output;  ///< JSON summary; stdout when empty
    std::string csv;     ///< base path for CSV tables; derived from output when empty
    std::string column;  ///< response column; first column when empty
    std::string trials_column;
    std::vector<std::string> predictors;
    std::size_t poly = 0;  ///< polynomial degree in the single predictor (regress)
    bool no_intercept = false;

    std::string kernel = "gauss";
    std::vector<double> theta;
    std::string grid = "auto";
    std::string rule;  ///< quadrature rule; family default when empty
    double gamma = 0.67;
    double c = 1.0;
    std::optional<std::size_t> perms;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    std::string theta_box;  ///< prml / fdr
    double cutoff = 0.1;    ///< fdr
    double tol = 1e-8;      ///< npmle
    std::optional<std::size_t> max_iter;

    double rho = 0.9;  ///< predict
    std::string ygrid = "auto";
    std::size_t ygrid_nodes = 1024;

    std::string scenario;  ///< simulate
    std::optional<std::size_t> n;
    bool list = false;
    std::string curve;  ///< comma-separated checkpoints
    std::size_t reps = 1;

    Json to_json() const;
};

/// 1.4826 * MAD, falling back to the sample sd and then to 1.
double robust_sd(std::span<const double> y);

/// Default mixing grid for a family, chosen from the data range.
GridSpec auto_grid(KernelFamily family, std::span<const double> y);

/// Executes a parsed configuration, writing artifacts and the JSON summary.
/// Library errors propagate as prmix::Error.
void execute(RunConfig config, std::ostream& out);

/// Parses argv-style arguments (without the program name), runs the
/// command, and maps failures to exit statuses: 1 for usage and
/// configuration problems, 2 for numerical failures.  Failures also write a
/// JSON error record to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prmix::app
