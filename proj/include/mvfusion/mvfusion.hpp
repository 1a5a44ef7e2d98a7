/*
 * Copyright 2026 The mvfusion Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "mvfusion/checkpoint.hpp"
#include "mvfusion/compare.hpp"
#include "mvfusion/datamodel.hpp"
#include "mvfusion/errors.hpp"
#include "mvfusion/fusion.hpp"
#include "mvfusion/grad_check.hpp"
#include "mvfusion/graph.hpp"
#include "mvfusion/io.hpp"
#include "mvfusion/layers.hpp"
#include "mvfusion/metrics.hpp"
#include "mvfusion/report.hpp"
#include "mvfusion/rng.hpp"
#include "mvfusion/tensor.hpp"
#include "mvfusion/training.hpp"
