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

// Umbrella header.

#pragma once

#include "tscan/autodiff.hpp"
#include "tscan/baseline.hpp"
#include "tscan/dictionary.hpp"
#include "tscan/episode.hpp"
#include "tscan/evaluate.hpp"
#include "tscan/experiment.hpp"
#include "tscan/explain.hpp"
#include "tscan/layers.hpp"
#include "tscan/metrics.hpp"
#include "tscan/model.hpp"
#include "tscan/param_store.hpp"
#include "tscan/records.hpp"
#include "tscan/synth.hpp"
#include "tscan/tensor.hpp"
#include "tscan/train.hpp"
