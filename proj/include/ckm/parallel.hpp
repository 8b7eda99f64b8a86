#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ckm {

// Splits [0, count) into at most `threads` contiguous ranges and runs
// body(begin, end) on each. Ranges never overlap, so bodies that write only
// inside their own range need no synchronization.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads <= 1) {
        if (count > 0) body(std::size_t{0}, count);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        const std::size_t chunk = count / threads;
        const std::size_t extra = count % threads;
        std::size_t begin = 0;
        for (std::size_t w = 0; w < threads; ++w) {
            const std::size_t end = begin + chunk + (w < extra ? 1 : 0);
            workers.emplace_back([&, begin, end] {
                try {
                    body(begin, end);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
            begin = end;
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace ckm
