// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#include "uhrbat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace uhrbat {

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) {
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(threads > 1 ? static_cast<std::size_t>(threads) : 1, n);
    if (workers == 1) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) {
            break;
        }
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

void parallel_invoke(const std::vector<std::function<void()>>& tasks, int threads) {
    if (tasks.empty()) {
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(threads > 1 ? static_cast<std::size_t>(threads) : 1, tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            try {
                tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
                break;  // first failure wins either way
            }
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        std::atomic<std::size_t> next{0};
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) {
                        return;
                    }
                    try {
                        tasks[i]();
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace uhrbat
