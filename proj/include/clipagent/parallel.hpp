#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <istream>
#include <mutex>
#include <thread>
#include <vector>

namespace clipagent {

// Applies fn to every item with up to `jobs` threads; results keep input order.
// The first exception thrown by fn is rethrown after all workers stop.
template <class Out, class In, class Fn>
std::vector<Out> parallel_map(const std::vector<In>& items, unsigned jobs, Fn&& fn) {
    std::vector<Out> out(items.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(items.size())));
    if (workers <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) out[i] = fn(items[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_lock;
    auto work = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            try {
                out[i] = fn(items[i]);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_lock);
                if (!error) error = std::current_exception();
                next = items.size();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

// Groups a record stream into batches of at most `batch_size` for bounded-memory processing.
template <class T>
class Batcher {
public:
    Batcher(std::size_t batch_size, std::function<void(std::vector<T>&)> flush)
        : batch_size_(std::max<std::size_t>(1, batch_size)), flush_(std::move(flush)) {}

    void push(T item) {
        pending_.push_back(std::move(item));
        if (pending_.size() >= batch_size_) finish();
    }
    void finish() {
        if (pending_.empty()) return;
        flush_(pending_);
        pending_.clear();
    }

private:
    std::size_t batch_size_;
    std::function<void(std::vector<T>&)> flush_;
    std::vector<T> pending_;
};

}  // namespace clipagent
