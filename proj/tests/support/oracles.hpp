/*
 * Copyright 2026 The TSCAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Test-only oracles: central finite differences and random fixtures. Nothing
// here calls the backward pass under test.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tscan/autodiff.hpp"
#include "tscan/param_store.hpp"
#include "tscan/tensor.hpp"

namespace tscan::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// f maps leaf inputs on a fresh tape to a scalar loss.
using InputLoss = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double eval_inputs(const InputLoss& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  return f(tape, vars).value().item();
}

inline GradCheck check_input_gradients(const InputLoss& f, std::vector<Tensor> inputs, double h = 1e-5) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  tape.backward(f(tape, vars));
  GradCheck r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(vars[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + h;
      const double up = eval_inputs(f, inputs);
      inputs[k][i] = orig - h;
      const double down = eval_inputs(f, inputs);
      inputs[k][i] = orig;
      const double err = rel_error(analytic[i], (up - down) / (2 * h));
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = "input " + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// f evaluates a scalar loss from a parameter store on a fresh tape.
using ParamLoss = std::function<Var(Tape&, const ParamStore&)>;

inline GradCheck check_param_gradients(const ParamLoss& f, ParamStore store, double h = 1e-5) {
  Gradients analytic;
  {
    Tape tape;
    tape.backward(f(tape, store));
    analytic = tape.gradients();
  }
  GradCheck r;
  for (const std::string& name : store.names()) {
    Tensor base = store.value(name);
    const Tensor a = analytic.count(name) ? analytic.at(name) : Tensor(base.shape(), 0.0);
    for (std::size_t i = 0; i < base.size(); ++i) {
      Tensor probe = base;
      probe[i] = base[i] + h;
      store.set(name, probe);
      Tape t1;
      const double up = f(t1, store).value().item();
      probe[i] = base[i] - h;
      store.set(name, probe);
      Tape t2;
      const double down = f(t2, store).value().item();
      const double err = rel_error(a[i], (up - down) / (2 * h));
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = name + "[" + std::to_string(i) + "]";
      }
    }
    store.set(name, base);
  }
  return r;
}

}  // namespace tscan::testing
