// SPDX-License-Identifier: Apache-2.0
//
// airybt: near-field Airy beam training laboratory
// Copyright (C) 2026 The airybt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "airybt/codebook.hpp"
#include "airybt/dataset.hpp"
#include "airybt/error.hpp"
#include "airybt/fft.hpp"
#include "airybt/field.hpp"
#include "airybt/metrics.hpp"
#include "airybt/network.hpp"
#include "airybt/parallel.hpp"
#include "airybt/scenario.hpp"
#include "airybt/search.hpp"
#include "airybt/trajectory.hpp"
