// Copyright 2026 The masa-align Authors
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

#include "masa/errors.hpp"
#include "masa/diffcore/tensor.hpp"
#include "masa/diffcore/parameter_store.hpp"
#include "masa/diffcore/tape.hpp"
#include "masa/diffcore/ops.hpp"
#include "masa/diffcore/container.hpp"
#include "masa/diffcore/optimizer.hpp"
#include "masa/diffcore/grad_check.hpp"
#include "masa/diffcore/checkpoint.hpp"
#include "masa/data/sequence.hpp"
#include "masa/data/padding.hpp"
#include "masa/data/manifest.hpp"
#include "masa/data/synthetic.hpp"
#include "masa/augment/augment.hpp"
#include "masa/model/config.hpp"
#include "masa/model/model.hpp"
#include "masa/losses/losses.hpp"
#include "masa/metrics/metrics.hpp"
#include "masa/trainer/config.hpp"
#include "masa/trainer/trainer.hpp"
