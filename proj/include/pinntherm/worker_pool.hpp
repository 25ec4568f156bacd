#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pinntherm {

/// Persistent pool executing chunked jobs. Chunks are claimed by atomic
/// counter, so the assignment of chunks to workers is nondeterministic, but
/// callers write results into per-chunk slots and reduce in chunk order,
/// which keeps every computed value independent of scheduling and thread
/// count. The calling thread participates as worker index 0; workers get
/// indices 1..size().
class WorkerPool {
public:
    explicit WorkerPool(int threads = 0) {
        int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        for (int i = 1; i < n; ++i)
            workers_.emplace_back([this, i] { worker_loop(i); });
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    /// Total worker count including the calling thread.
    int size() const { return static_cast<int>(workers_.size()) + 1; }

    /// Runs fn(chunk_index, worker_index) for every chunk in [0, n_chunks).
    /// Blocks until all chunks complete. worker_index < size().
    void run_chunks(std::size_t n_chunks, const std::function<void(std::size_t, int)>& fn) {
        if (n_chunks == 0) return;
        {
            std::lock_guard lock(mutex_);
            job_ = &fn;
            total_ = n_chunks;
            next_ = 0;
            done_ = 0;
            ++generation_;
        }
        cv_.notify_all();
        drain(0);
        std::unique_lock lock(mutex_);
        finished_cv_.wait(lock, [this] { return done_ == total_; });
        job_ = nullptr;
    }

private:
    void drain(int worker_index) {
        for (;;) {
            std::size_t chunk;
            {
                std::lock_guard lock(mutex_);
                if (next_ >= total_) return;
                chunk = next_++;
            }
            (*job_)(chunk, worker_index);
            std::lock_guard lock(mutex_);
            if (++done_ == total_) finished_cv_.notify_all();
        }
    }

    void worker_loop(int worker_index) {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            drain(worker_index);
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_, finished_cv_;
    const std::function<void(std::size_t, int)>* job_ = nullptr;
    std::size_t total_ = 0, next_ = 0, done_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace pinntherm
