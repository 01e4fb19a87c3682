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

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace airybt
{
    // Worker count from ABL_JOBS, falling back to the hardware concurrency.
    inline unsigned default_jobs()
    {
        if (const char *env = std::getenv("ABL_JOBS"))
        {
            try
            {
                const int v = std::stoi(env);
                if (v > 0)
                    return static_cast<unsigned>(v);
            }
            catch (...)
            {
            }
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }

    // Runs fn(i) for i in [0, n) on `jobs` threads with static interleaved
    // assignment. fn must only write to slots owned by i; the first exception
    // thrown by any worker is rethrown on the caller.
    template <class Fn>
    void parallel_for(std::size_t n, unsigned jobs, Fn &&fn)
    {
        jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
        if (jobs == 1)
        {
            for (std::size_t i = 0; i < n; ++i)
                fn(i);
            return;
        }
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> workers;
        workers.reserve(jobs);
        for (unsigned w = 0; w < jobs; ++w)
        {
            workers.emplace_back([&, w] {
                try
                {
                    for (std::size_t i = w; i < n; i += jobs)
                        fn(i);
                }
                catch (...)
                {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            });
        }
        for (auto &t : workers)
            t.join();
        if (failure)
            std::rethrow_exception(failure);
    }
}
