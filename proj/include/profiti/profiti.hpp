// Copyright 2026 The ProFITi Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "profiti/errors.hpp"
#include "profiti/tensor.hpp"
#include "profiti/linalg.hpp"
#include "profiti/autodiff.hpp"
#include "profiti/parameters.hpp"
#include "profiti/shiesh.hpp"
#include "profiti/imts.hpp"
#include "profiti/jsonl.hpp"
#include "profiti/synthetic.hpp"
#include "profiti/layers.hpp"
#include "profiti/encoder.hpp"
#include "profiti/model.hpp"
#include "profiti/parallel.hpp"
#include "profiti/metrics.hpp"
#include "profiti/config_json.hpp"
#include "profiti/checkpoint.hpp"
#include "profiti/trainer.hpp"
#include "profiti/report.hpp"
