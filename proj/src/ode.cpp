#include "etse/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace etse {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Continuous extension (Hairer, contd5).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 10.0;
constexpr int kMaxBisections = 200;

void require_finite(const Vector& v, double t, const char* what) {
  if (!v.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite " << what << " at t=" << t << " (model fault)";
    throw SimulationFault(msg.str());
  }
}

double scaled_norm(const Vector& v, const Vector& ref, const IntegratorTolerances& tol) {
  if (v.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double sk = tol.abs + tol.rel * std::abs(ref[i]);
    acc += (v[i] / sk) * (v[i] / sk);
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double initial_step(const RateFn& rates, double t0, const Vector& y0, const Vector& f0,
                    const IntegratorTolerances& tol, std::size_t& evals) {
  const double d0 = scaled_norm(y0, y0, tol);
  const double d1n = scaled_norm(f0, y0, tol);
  double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  Vector y1 = y0 + h0 * f0;
  Vector f1(y0.size());
  rates(t0 + h0, y1, f1);
  ++evals;
  require_finite(f1, t0 + h0, "rate");
  const double d2 = scaled_norm(f1 - f0, y0, tol) / h0;
  const double dmax = std::max(d1n, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
  return std::min(100.0 * h0, h1);
}

}  // namespace

FlowResult integrate_flow(const Vector& y0, const RateFn& rates, std::span<const GuardFn> guards,
                          double t0, double t1, const IntegratorTolerances& tol, double step_hint,
                          bool record_steps) {
  if (!(t1 >= t0)) throw std::invalid_argument("integrate_flow: t_span end precedes start");
  FlowResult out;
  out.segment.push_back({t0, y0});

  for (std::size_t i = 0; i < guards.size(); ++i) {
    const double g = guards[i](t0, y0);
    if (!std::isfinite(g)) throw SimulationFault("non-finite guard value at flow entry");
    if (g >= 0.0) {
      out.hit = GuardHit{i, t0, g};
      out.next_step = step_hint;
      return out;
    }
  }
  if (t1 == t0) {
    out.next_step = step_hint;
    return out;
  }

  const Eigen::Index n = y0.size();
  Vector y = y0, ynew(n), ytmp(n), err(n);
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  double t = t0;

  rates(t, y, k1);
  ++out.rate_evaluations;
  require_finite(k1, t, "rate");

  double h = step_hint > 0.0 ? step_hint : initial_step(rates, t0, y0, k1, tol, out.rate_evaluations);
  if (tol.max_step > 0.0) h = std::min(h, tol.max_step);
  bool rejected_last = false;

  while (t < t1) {
    double step = h;
    bool last = false;
    if (t + step >= t1) {
      step = t1 - t;
      last = true;
    }
    if (step < tol.min_step * std::max(1.0, std::abs(t))) {
      std::ostringstream msg;
      msg << "step-size underflow at t=" << t << " (h=" << step << "); dynamics not integrable";
      throw SimulationFault(msg.str());
    }

    ytmp = y + step * a21 * k1;
    rates(t + c2 * step, ytmp, k2);
    ytmp = y + step * (a31 * k1 + a32 * k2);
    rates(t + c3 * step, ytmp, k3);
    ytmp = y + step * (a41 * k1 + a42 * k2 + a43 * k3);
    rates(t + c4 * step, ytmp, k4);
    ytmp = y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rates(t + c5 * step, ytmp, k5);
    ytmp = y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const double tnew = last ? t1 : t + step;
    rates(tnew, ytmp, k6);
    ynew = y + step * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    rates(tnew, ynew, k7);
    out.rate_evaluations += 6;
    require_finite(k7, tnew, "rate");
    require_finite(ynew, tnew, "state");

    err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sk = tol.abs + tol.rel * std::max(std::abs(y[i]), std::abs(ynew[i]));
      en += (err[i] / sk) * (err[i] / sk);
    }
    en = n > 0 ? std::sqrt(en / static_cast<double>(n)) : 0.0;

    if (en > 1.0) {
      h = step * std::max(kFacMin, kSafety * std::pow(en, -0.2));
      rejected_last = true;
      continue;
    }

    // Accepted. Check guards at the step end.
    std::optional<GuardHit> earliest;
    for (std::size_t gi = 0; gi < guards.size(); ++gi) {
      const double gend = guards[gi](tnew, ynew);
      if (!std::isfinite(gend)) throw SimulationFault("non-finite guard value");
      if (gend < 0.0) continue;

      const Vector r2 = ynew - y;
      const Vector r3 = step * k1 - r2;
      const Vector r4 = r2 - step * k7 - r3;
      const Vector r5 = step * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      auto dense = [&](double tm) -> Vector {
        const double th = (tm - t) / step;
        const double th1 = 1.0 - th;
        return y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
      };

      double lo = t, hi = tnew, ghi = gend;
      for (int it = 0; it < kMaxBisections; ++it) {
        if (hi - lo <= tol.event_time && std::abs(ghi) <= tol.guard_value) break;
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        const double gm = guards[gi](mid, dense(mid));
        if (gm >= 0.0) {
          hi = mid;
          ghi = gm;
        } else {
          lo = mid;
        }
      }
      if (!earliest || hi < earliest->t) earliest = GuardHit{gi, hi, ghi};
    }

    if (earliest) {
      const double th = (earliest->t - t) / step;
      Vector yhit = ynew;
      if (earliest->t < tnew) {
        const Vector r2 = ynew - y;
        const Vector r3 = step * k1 - r2;
        const Vector r4 = r2 - step * k7 - r3;
        const Vector r5 = step * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        const double th1 = 1.0 - th;
        yhit = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
      }
      out.segment.push_back({earliest->t, std::move(yhit)});
      out.hit = earliest;
      out.next_step = std::max(step, h);
      return out;
    }

    double fac = kSafety * std::pow(std::max(en, 1e-10), -0.2);
    fac = std::clamp(fac, kFacMin, kFacMax);
    if (rejected_last) fac = std::min(fac, 1.0);
    rejected_last = false;
    const double proposed = step * fac;
    // Do not let a short clamped final step shrink the continuation hint.
    h = last ? std::max(h, proposed) : proposed;
    if (tol.max_step > 0.0) h = std::min(h, tol.max_step);

    t = tnew;
    y.swap(ynew);
    k1.swap(k7);
    if (record_steps || t >= t1) out.segment.push_back({t, y});
  }
  out.next_step = h;
  return out;
}

}  // namespace etse
