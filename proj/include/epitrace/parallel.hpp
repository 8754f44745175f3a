#ifndef EPITRACE_PARALLEL_HPP
#define EPITRACE_PARALLEL_HPP

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace epitrace {

/// Fixed-size pool that runs a range split into contiguous chunks, one chunk
/// per worker. Chunk boundaries depend only on the range and worker count;
/// callers that reduce per-index results in index order are therefore
/// deterministic regardless of scheduling.
class WorkerPool
{
public:
    explicit WorkerPool(unsigned workers = 1);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    unsigned workers() const { return workers_; }

    /// Calls body(begin, end) over a partition of [0, n); blocks until done.
    /// The first exception thrown by any chunk is rethrown.
    void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

private:
    void loop(unsigned index);

    unsigned workers_;
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable wake_, done_;
    const std::function<void(std::size_t, std::size_t)>* body_ = nullptr;
    std::size_t n_ = 0;
    std::size_t generation_ = 0;
    unsigned pending_ = 0;
    bool stop_ = false;
    std::exception_ptr error_;
};

/// One-shot variant for callers without a pool.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace epitrace

#endif // EPITRACE_PARALLEL_HPP
