// Copyright 2026 The C2Gen Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "c2gen/core.hpp"
#include "c2gen/rng.hpp"
#include "c2gen/lexicon.hpp"
#include "c2gen/dataset.hpp"
#include "c2gen/split.hpp"
#include "c2gen/stream.hpp"
#include "c2gen/model.hpp"
#include "c2gen/adam.hpp"
#include "c2gen/checkpoint.hpp"
#include "c2gen/eval.hpp"
#include "c2gen/continual.hpp"
#include "c2gen/trainer.hpp"
#include "c2gen/config.hpp"
#include "c2gen/experiment.hpp"
#include "c2gen/report.hpp"
