#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qfield/grid_state.hpp"

namespace qfield {

enum class PotentialKind { free, harmonic, box, barrier, linear, tabulated };

inline const char* to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::free: return "free";
    case PotentialKind::harmonic: return "harmonic";
    case PotentialKind::box: return "box";
    case PotentialKind::barrier: return "barrier";
    case PotentialKind::linear: return "linear";
    case PotentialKind::tabulated: return "tabulated";
  }
  return "unknown";
}

struct PotentialSpec {
  PotentialKind kind = PotentialKind::free;
  double omega = 1.0;   // harmonic angular frequency
  double height = 0.0;  // barrier
  double left = 0.0;
  double right = 0.0;
  double slope = 0.0;   // linear V = slope * x
  std::vector<double> table;

  static PotentialSpec free_particle() { return {}; }
  static PotentialSpec harmonic(double omega) {
    PotentialSpec s;
    s.kind = PotentialKind::harmonic;
    s.omega = omega;
    return s;
  }
  static PotentialSpec box() {
    PotentialSpec s;
    s.kind = PotentialKind::box;
    return s;
  }
  static PotentialSpec barrier(double height, double left, double right) {
    PotentialSpec s;
    s.kind = PotentialKind::barrier;
    s.height = height;
    s.left = left;
    s.right = right;
    return s;
  }
  static PotentialSpec linear(double slope) {
    PotentialSpec s;
    s.kind = PotentialKind::linear;
    s.slope = slope;
    return s;
  }
  static PotentialSpec tabulated(std::vector<double> values) {
    PotentialSpec s;
    s.kind = PotentialKind::tabulated;
    s.table = std::move(values);
    return s;
  }

  friend bool operator==(const PotentialSpec&, const PotentialSpec&) = default;
};

/// V and dV/dx sampled on a grid. `edge` marks points whose derivative is a
/// one-sided difference across a discontinuity; residuals skip them.
struct PotentialField {
  std::vector<double> v;
  std::vector<double> v_x;
  std::vector<bool> edge;
  /// box wells are realised as V = 0 with hard walls in the propagator
  bool hard_walls = false;

  std::size_t size() const { return v.size(); }
};

inline PotentialField eval_potential(const PotentialSpec& spec, const Grid& grid) {
  const std::size_t n = grid.n_points;
  PotentialField f;
  f.v.assign(n, 0.0);
  f.v_x.assign(n, 0.0);
  f.edge.assign(n, false);

  switch (spec.kind) {
    case PotentialKind::free:
      break;
    case PotentialKind::box:
      f.hard_walls = true;
      break;
    case PotentialKind::harmonic: {
      if (!(spec.omega > 0.0) || !std::isfinite(spec.omega))
        throw Error(ErrorCode::invalid_argument, "harmonic omega must be positive");
      const double k = grid.mass * spec.omega * spec.omega;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = grid.x(i);
        f.v[i] = 0.5 * k * x * x;
        f.v_x[i] = k * x;
      }
      break;
    }
    case PotentialKind::linear: {
      if (!std::isfinite(spec.slope)) throw Error(ErrorCode::invalid_argument, "linear slope must be finite");
      for (std::size_t i = 0; i < n; ++i) {
        f.v[i] = spec.slope * grid.x(i);
        f.v_x[i] = spec.slope;
      }
      break;
    }
    case PotentialKind::barrier: {
      if (!(spec.left < spec.right)) throw Error(ErrorCode::invalid_argument, "barrier edges must satisfy left < right");
      if (!std::isfinite(spec.height)) throw Error(ErrorCode::invalid_argument, "barrier height must be finite");
      for (std::size_t i = 0; i < n; ++i) {
        const double x = grid.x(i);
        f.v[i] = (x >= spec.left && x <= spec.right) ? spec.height : 0.0;
      }
      // Zero slope away from the jumps; one-sided difference at each jump.
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (f.v[i + 1] != f.v[i]) {
          const double slope = (f.v[i + 1] - f.v[i]) / grid.dx;
          const std::size_t at = f.v[i] == 0.0 ? i + 1 : i;
          f.v_x[at] = slope;
          f.edge[i] = f.edge[i + 1] = true;
        }
      }
      break;
    }
    case PotentialKind::tabulated: {
      if (spec.table.size() != n)
        throw Error(ErrorCode::size_mismatch, "tabulated potential has " + std::to_string(spec.table.size()) +
                                                  " samples, grid has " + std::to_string(n));
      f.v = spec.table;
      for (double v : f.v)
        if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "tabulated potential must be finite");
      for (std::size_t i = 1; i + 1 < n; ++i) f.v_x[i] = (f.v[i + 1] - f.v[i - 1]) / (2.0 * grid.dx);
      f.v_x[0] = (f.v[1] - f.v[0]) / grid.dx;
      f.v_x[n - 1] = (f.v[n - 1] - f.v[n - 2]) / grid.dx;
      break;
    }
  }
  return f;
}

}  // namespace qfield
