#include "resprob/pmf.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace resprob {

namespace {

usec_t ceil_div(usec_t v, usec_t d) { return (v + d - 1) / d; }

}  // namespace

Pmf::Pmf(usec_t origin, std::vector<double> masses, usec_t granularity)
    : origin_(origin), granularity_(granularity), mass_(std::move(masses)) {
  if (granularity_ < 1) throw std::invalid_argument("granularity must be >= 1");
  if (origin_ < 0) throw std::invalid_argument("negative execution times are not allowed");
  for (double m : mass_) {
    if (!(m >= 0.0) || !std::isfinite(m))
      throw std::invalid_argument("masses must be finite and nonnegative");
  }
  // Trim zero-mass leading/trailing entries so c_min and c_max are tight.
  std::size_t first = 0;
  while (first < mass_.size() && mass_[first] == 0.0) ++first;
  if (first == mass_.size())
    throw std::invalid_argument("distribution has no mass");
  std::size_t last = mass_.size() - 1;
  while (mass_[last] == 0.0) --last;
  if (first > 0 || last + 1 < mass_.size()) {
    origin_ += static_cast<usec_t>(first) * granularity_;
    mass_ = std::vector<double>(mass_.begin() + first, mass_.begin() + last + 1);
  }
  const double total = std::accumulate(mass_.begin(), mass_.end(), 0.0);
  if (total <= 0.0) throw std::invalid_argument("distribution has no mass");
  for (double& m : mass_) m /= total;
}

double Pmf::mass_at(usec_t value) const {
  if (value < origin_ || value > max_value()) return 0.0;
  const usec_t off = value - origin_;
  if (off % granularity_ != 0) return 0.0;
  return mass_[static_cast<std::size_t>(off / granularity_)];
}

double Pmf::mean() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < mass_.size(); ++i)
    acc += static_cast<double>(value_at(i)) * mass_[i];
  return acc;
}

Pmf Pmf::from_trace(std::span<const usec_t> samples) {
  if (samples.empty()) throw std::invalid_argument("empty trace");
  usec_t lo = samples[0], hi = samples[0];
  for (usec_t s : samples) {
    if (s < 0) throw std::invalid_argument("negative sample in trace");
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi - lo > 20'000'000)
    throw std::invalid_argument("trace value range exceeds 2e7 us");
  std::vector<double> mass(static_cast<std::size_t>(hi - lo + 1), 0.0);
  const double w = 1.0 / static_cast<double>(samples.size());
  for (usec_t s : samples) mass[static_cast<std::size_t>(s - lo)] += w;
  return Pmf(lo, std::move(mass), 1);
}

Pmf Pmf::from_beta(double alpha, double beta, usec_t support_max, usec_t grid) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("beta shape parameters must be positive");
  if (support_max <= 0) throw std::invalid_argument("support_max must be positive");
  if (grid < 1 || support_max % grid != 0)
    throw std::invalid_argument("grid must be >= 1 and divide support_max");
  const std::size_t k_max = static_cast<std::size_t>(support_max / grid);
  // Mass at k*grid is the CDF increment over ((k-1)*grid, k*grid], which
  // keeps the discretized CDF exact at the grid points.
  std::vector<double> mass(k_max, 0.0);
  double prev = 0.0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double x = static_cast<double>(k * grid) / static_cast<double>(support_max);
    const double cur = boost::math::ibeta(alpha, beta, std::min(1.0, x));
    mass[k - 1] = std::max(0.0, cur - prev);
    prev = cur;
  }
  return Pmf(grid, std::move(mass), grid);
}

Pmf Pmf::load(std::istream& in, const std::string& origin_name) {
  std::vector<usec_t> values;
  std::vector<double> probs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    usec_t v;
    double p;
    if (!(ls >> v)) continue;  // blank or comment-only line
    if (!(ls >> p)) {
      throw ConfigError(origin_name + ":" + std::to_string(line_no) +
                        ": expected '<value_us> <probability>'");
    }
    if (!values.empty() && v <= values.back()) {
      throw ConfigError(origin_name + ":" + std::to_string(line_no) +
                        ": values must be strictly increasing");
    }
    if (v < 0 || p < 0.0 || !std::isfinite(p)) {
      throw ConfigError(origin_name + ":" + std::to_string(line_no) +
                        ": value must be >= 0 and probability finite and >= 0");
    }
    values.push_back(v);
    probs.push_back(p);
  }
  if (values.empty()) throw ConfigError(origin_name + ": no entries");
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) >= 1e-6) {
    throw ConfigError(origin_name + ": probabilities sum to " + std::to_string(total) +
                      ", more than 1e-6 away from 1");
  }
  // Grid spacing: the largest step all nonzero values share.
  usec_t g = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (probs[i] > 0.0) g = std::gcd(g, values[i]);
  if (g == 0) g = 1;
  usec_t lo = values.front();
  std::vector<double> mass(static_cast<std::size_t>((values.back() - lo) / g + 1), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if ((values[i] - lo) % g != 0) {
      // Only possible when a zero-mass entry is off the common grid; drop it.
      continue;
    }
    mass[static_cast<std::size_t>((values[i] - lo) / g)] = probs[i];
  }
  return Pmf(lo, std::move(mass), g);
}

Pmf Pmf::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open PMF file: " + path);
  return load(in, path);
}

void Pmf::save(std::ostream& out) const {
  out << "# resprob-pmf v1\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < mass_.size(); ++i)
    if (mass_[i] > 0.0) out << value_at(i) << ' ' << mass_[i] << '\n';
}

void Pmf::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open PMF file for writing: " + path);
  save(out);
}

Pmf Pmf::truncated_below(double threshold) const {
  if (threshold <= 0.0) return *this;
  std::vector<double> mass = mass_;
  for (double& m : mass)
    if (m < threshold) m = 0.0;
  return Pmf(origin_, std::move(mass), granularity_);
}

CdfView::CdfView(const Pmf& pmf)
    : origin_(pmf.min_value()),
      granularity_(pmf.granularity()),
      cum_(pmf.masses()) {
  for (std::size_t i = 1; i < cum_.size(); ++i) cum_[i] += cum_[i - 1];
}

double CdfView::operator()(usec_t c) const {
  if (c < origin_) return 0.0;
  const usec_t idx = (c - origin_) / granularity_;
  if (idx >= static_cast<usec_t>(cum_.size())) return 1.0;
  return cum_[static_cast<std::size_t>(idx)];
}

double cdf(const Pmf& pmf, usec_t c) { return CdfView(pmf)(c); }

Pmf resample(const Pmf& pmf, usec_t delta) {
  if (delta < 1) throw std::invalid_argument("delta must be >= 1");
  const usec_t lo = ceil_div(pmf.min_value(), delta);
  const usec_t hi = ceil_div(pmf.max_value(), delta);
  std::vector<double> mass(static_cast<std::size_t>(hi - lo + 1), 0.0);
  const auto& src = pmf.masses();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] == 0.0) continue;
    const usec_t bucket = ceil_div(pmf.value_at(i), delta);
    mass[static_cast<std::size_t>(bucket - lo)] += src[i];
  }
  return Pmf(lo * delta, std::move(mass), delta);
}

bool dominates(const Pmf& a, const Pmf& b) {
  // Both CDFs are right-continuous step functions; it is enough to compare
  // them at every jump point of either.
  const CdfView fa(a), fb(b);
  std::vector<usec_t> points;
  points.reserve(a.grid_size() + b.grid_size());
  for (std::size_t i = 0; i < a.grid_size(); ++i)
    if (a.masses()[i] > 0.0) points.push_back(a.value_at(i));
  for (std::size_t i = 0; i < b.grid_size(); ++i)
    if (b.masses()[i] > 0.0) points.push_back(b.value_at(i));
  for (usec_t x : points)
    if (fa(x) > fb(x) + 1e-12) return false;
  return true;
}

}  // namespace resprob
