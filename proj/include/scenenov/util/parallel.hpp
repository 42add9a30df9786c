/*
 * Copyright 2026 The Scene Novelty Authors.
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

#pragma once

#include <cstddef>
#include <functional>

namespace scenenov {

// Process-wide worker cap (the CLI's --threads). Defaults to 1.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Splits [begin, end) into contiguous chunks, one per worker, and runs
// fn(chunk_begin, chunk_end) on each. Chunks never overlap, so callers that
// write disjoint outputs stay deterministic for any thread count. Runs inline
// when only one worker is configured or the range is shorter than min_chunk.
void parallel_for(std::size_t begin, std::size_t end, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace scenenov
