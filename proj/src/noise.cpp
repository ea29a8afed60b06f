#include "etse/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace etse {
namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double keyed_uniform(std::uint64_t seed, std::uint64_t node, std::uint64_t component,
                     std::int64_t interval) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ node);
  h = splitmix64(h ^ component);
  h = splitmix64(h ^ static_cast<std::uint64_t>(interval));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
  return 2.0 * u - 1.0;
}

bool NoiseSignal::silent() const {
  return std::all_of(amplitude.begin(), amplitude.end(), [](double a) { return a == 0.0; });
}

std::int64_t NoiseSignal::interval_index(double t) const {
  return static_cast<std::int64_t>(std::floor(t / dwell));
}

Vector NoiseSignal::sample_interval(int node, std::int64_t k) const {
  const int d = dims.at(node);
  Vector w(d);
  const double a = amplitude.at(node);
  for (int c = 0; c < d; ++c)
    w[c] = a == 0.0 ? 0.0 : a * keyed_uniform(seed, static_cast<std::uint64_t>(node), c, k);
  return w;
}

Vector NoiseSignal::sample(int node, double t) const { return sample_interval(node, interval_index(t)); }

Vector NoiseSignal::stacked_interval(std::int64_t k) const {
  int m = 0;
  for (int d : dims) m += d;
  Vector w(m);
  int off = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    w.segment(off, dims[i]) = sample_interval(static_cast<int>(i), k);
    off += dims[i];
  }
  return w;
}

Vector NoiseSignal::stacked(double t) const { return stacked_interval(interval_index(t)); }

Vector DisturbanceSpec::at(double t) const {
  if (dim == 0 || times.empty() || t < times.front()) return Vector::Zero(dim);
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double DisturbanceSpec::next_break(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  return it == times.end() ? kInf : *it;
}

double ScenarioInputs::next_break(double t) const {
  double next = disturbance_.next_break(t);
  if (!noise_.silent()) {
    const std::int64_t k = noise_.interval_index(t);
    double b = static_cast<double>(k + 1) * noise_.dwell;
    if (!(b > t)) b = static_cast<double>(k + 2) * noise_.dwell;
    next = std::min(next, b);
  }
  return next;
}

SegmentInput ScenarioInputs::on(double t_begin, double t_end) const {
  // The midpoint identifies the held interval without boundary round-off.
  const double probe = std::isfinite(t_end) && t_end > t_begin ? 0.5 * (t_begin + t_end) : t_begin;
  return {disturbance_.at(probe), noise_.stacked(probe)};
}

}  // namespace etse
