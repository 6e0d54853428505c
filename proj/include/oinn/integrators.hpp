#pragma once

// Explicit Runge-Kutta integration of dy/dt = phi(t, y) on [0, T].

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "oinn/dynamics.hpp"

namespace oinn {

enum class TerminalStatus { completed, step_underflow, non_finite_state };

std::string status_name(TerminalStatus s);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  TerminalStatus status = TerminalStatus::completed;
  std::size_t steps = 0;     // accepted steps
  std::size_t rejected = 0;  // adaptive only
};

enum class FixedMethod { euler, rk4 };
enum class AdaptiveMethod { rk45, rk23 };

FixedMethod parse_fixed_method(const std::string& s);
AdaptiveMethod parse_adaptive_method(const std::string& s);

struct StepControl {
  double rtol = 1e-6;
  double atol = 1e-9;
  double min_step = 1e-12;
  double max_step = 0.0;  // 0 means T
  double safety = 0.9;
  // Attempted steps (accepted + rejected) before giving up with
  // step-underflow; a field that forces ever-smaller steps across a switching
  // surface would otherwise never finish.
  std::size_t max_attempts = 5'000'000;
  void validate() const;
};

// Fixed step h; the last step is shortened to land on T. `thin` stores every
// k-th step (the final state is always stored).
Trajectory integrate_fixed(const VectorField& f, std::span<const double> y0, double T, double h,
                           FixedMethod method, std::size_t thin = 1);

// Dormand-Prince 5(4) or Bogacki-Shampine 3(2) with a standard step-size
// controller. Lands exactly on T.
Trajectory integrate_adaptive(const VectorField& f, std::span<const double> y0, double T,
                              const StepControl& ctrl = {},
                              AdaptiveMethod method = AdaptiveMethod::rk45);

// Last state; throws UnavailableEndpoint when the run did not complete.
Vec endpoint(const Trajectory& traj);

// State after exactly `steps` fixed steps of size h (no storage).
Vec fixed_state_at(const VectorField& f, std::span<const double> y0, double h, std::size_t steps,
                   FixedMethod method);

}  // namespace oinn
