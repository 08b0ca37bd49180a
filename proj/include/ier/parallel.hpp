// Copyright 2026 The ier Authors.
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


#ifndef IER_PARALLEL_HPP
#define IER_PARALLEL_HPP

#include "ier/core.hpp"

#include <functional>

namespace ier {

/// Worker count: IER_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
/// visited exactly once; callers write results into per-index slots so the
/// reduction order stays fixed. The first exception thrown is rethrown.
void parallel_for(Index n, const std::function<void(Index)>& fn);

}  // namespace ier

#endif  // IER_PARALLEL_HPP
