#include "epitrace/parallel.hpp"

#include <algorithm>

namespace epitrace {

namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t n, unsigned parts, unsigned k)
{
    const std::size_t base = n / parts, extra = n % parts;
    const std::size_t begin = k * base + std::min<std::size_t>(k, extra);
    return {begin, begin + base + (k < extra ? 1 : 0)};
}

} // namespace

WorkerPool::WorkerPool(unsigned workers) : workers_(std::max(1u, workers))
{
    for (unsigned k = 1; k < workers_; ++k)
        threads_.emplace_back([this, k] { loop(k); });
}

WorkerPool::~WorkerPool()
{
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_)
        t.join();
}

void WorkerPool::loop(unsigned index)
{
    std::size_t seen = 0;
    for (;;) {
        const std::function<void(std::size_t, std::size_t)>* body;
        std::size_t n;
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_)
                return;
            seen = generation_;
            body = body_;
            n = n_;
        }
        std::exception_ptr err;
        auto [b, e] = chunk(n, workers_, index);
        try {
            if (b < e)
                (*body)(b, e);
        } catch (...) {
            err = std::current_exception();
        }
        {
            std::lock_guard lock(mutex_);
            if (err && !error_)
                error_ = err;
            if (--pending_ == 0)
                done_.notify_one();
        }
    }
}

void WorkerPool::run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body)
{
    if (workers_ == 1 || n < 2 * workers_) {
        if (n > 0)
            body(0, n);
        return;
    }
    {
        std::lock_guard lock(mutex_);
        body_ = &body;
        n_ = n;
        pending_ = workers_ - 1;
        error_ = nullptr;
        ++generation_;
    }
    wake_.notify_all();
    std::exception_ptr mine;
    auto [b, e] = chunk(n, workers_, 0);
    try {
        body(b, e);
    } catch (...) {
        mine = std::current_exception();
    }
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return pending_ == 0; });
    if (mine)
        std::rethrow_exception(mine);
    if (error_)
        std::rethrow_exception(error_);
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t, std::size_t)>& body)
{
    if (workers <= 1 || n < 2) {
        if (n > 0)
            body(0, n);
        return;
    }
    WorkerPool pool(workers);
    pool.run(n, body);
}

} // namespace epitrace
