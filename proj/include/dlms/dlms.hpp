// Copyright 2026 The deeplms Authors
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

#ifndef DLMS_DLMS_HPP
#define DLMS_DLMS_HPP

#include "dlms/canceler.hpp"
#include "dlms/channel.hpp"
#include "dlms/experiment.hpp"
#include "dlms/io.hpp"
#include "dlms/linalg.hpp"
#include "dlms/metrics.hpp"
#include "dlms/parallel.hpp"
#include "dlms/rng.hpp"
#include "dlms/signal.hpp"
#include "dlms/theory.hpp"

#endif  // DLMS_DLMS_HPP
