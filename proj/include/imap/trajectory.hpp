#ifndef IMAP_TRAJECTORY_HPP_
#define IMAP_TRAJECTORY_HPP_

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "imap/linalg.hpp"
#include "imap/models.hpp"

namespace imap {

/// Simulated ground truth and its observations, t = 1..T.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> observations;

  std::size_t length() const noexcept { return observations.size(); }

  void validate() const {
    if (times.size() != states.size() || states.size() != observations.size())
      throw std::invalid_argument("Trajectory: sequences must have equal length");
    if (observations.empty()) throw std::invalid_argument("Trajectory: length must be >= 1");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw std::invalid_argument("Trajectory: times must be strictly increasing");
  }
};

/// Draws x_0 from the initial distribution and then x_t, y_t for t = 1..T.
/// A pure function of the model, T and the generator state.
inline Trajectory simulate(const StateSpaceModel& model, int steps, Rng& rng) {
  if (steps < 1) throw std::invalid_argument("simulate: T must be >= 1");
  Trajectory traj;
  traj.times.reserve(steps);
  traj.states.reserve(steps);
  traj.observations.reserve(steps);
  Vector x = model.sample_initial(rng);
  for (int t = 1; t <= steps; ++t) {
    x = model.propagate_truth(x, t, rng);
    traj.times.push_back(t * model.time_step());
    traj.states.push_back(x);
    traj.observations.push_back(model.measurement_sample(x, t, rng));
  }
  return traj;
}

/// Fixed 12-significant-digit rendering used by every CSV writer.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("CSV: cannot parse number '" + s + "'");
  }
  if (used != s.size() && s.find_first_not_of(" \r", used) != std::string::npos)
    throw std::invalid_argument("CSV: trailing characters in '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  traj.validate();
  const auto d = traj.states.front().size();
  const auto m = traj.observations.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < d; ++i) os << ",x_" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",y_" << i + 1;
  os << '\n';
  for (std::size_t k = 0; k < traj.length(); ++k) {
    os << format_number(traj.times[k]);
    for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_number(traj.states[k][i]);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << format_number(traj.observations[k][i]);
    os << '\n';
  }
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("trajectory CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "t") throw std::invalid_argument("trajectory CSV: header must start with 't'");
  Eigen::Index d = 0, m = 0;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].rfind("x_", 0) == 0) {
      if (m != 0) throw std::invalid_argument("trajectory CSV: x columns must precede y columns");
      ++d;
    } else if (header[i].rfind("y_", 0) == 0) {
      ++m;
    } else {
      throw std::invalid_argument("trajectory CSV: unexpected column '" + header[i] + "'");
    }
  }
  if (d == 0 || m == 0) throw std::invalid_argument("trajectory CSV: need at least one x and one y column");
  Trajectory traj;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != static_cast<std::size_t>(1 + d + m))
      throw std::invalid_argument("trajectory CSV: wrong number of columns in row " +
                                  std::to_string(traj.length() + 1));
    Vector x(d), y(m);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = detail::parse_double(cells[1 + i]);
    for (Eigen::Index i = 0; i < m; ++i) y[i] = detail::parse_double(cells[1 + d + i]);
    traj.times.push_back(detail::parse_double(cells[0]));
    traj.states.push_back(std::move(x));
    traj.observations.push_back(std::move(y));
  }
  traj.validate();
  return traj;
}

/// Predicted and filtered means of a filter run, one pair per observation.
struct EstimateSequence {
  std::vector<Vector> predictions;
  std::vector<Vector> estimates;
};

/// CSV `t,mu_minus_1..d,mu_hat_1..d`; t is the 1-based step index.
inline void write_estimates_csv(std::ostream& os, const EstimateSequence& run) {
  if (run.predictions.size() != run.estimates.size() || run.estimates.empty())
    throw std::invalid_argument("estimate CSV: predictions and estimates must be nonempty and aligned");
  const auto d = run.estimates.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < d; ++i) os << ",mu_minus_" << i + 1;
  for (Eigen::Index i = 0; i < d; ++i) os << ",mu_hat_" << i + 1;
  os << '\n';
  for (std::size_t k = 0; k < run.estimates.size(); ++k) {
    os << k + 1;
    for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_number(run.predictions[k][i]);
    for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_number(run.estimates[k][i]);
    os << '\n';
  }
}

}  // namespace imap

#endif  // IMAP_TRAJECTORY_HPP_
