// Copyright 2026 The bnlu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "bnlu/ablation.hpp"
#include "bnlu/bidinlu.hpp"
#include "bnlu/checkpoint.hpp"
#include "bnlu/config.hpp"
#include "bnlu/corpus.hpp"
#include "bnlu/encoder.hpp"
#include "bnlu/error.hpp"
#include "bnlu/gradcheck.hpp"
#include "bnlu/metrics.hpp"
#include "bnlu/model.hpp"
#include "bnlu/model_check.hpp"
#include "bnlu/ops.hpp"
#include "bnlu/rng.hpp"
#include "bnlu/synthetic.hpp"
#include "bnlu/tape.hpp"
#include "bnlu/tensor.hpp"
#include "bnlu/training.hpp"
