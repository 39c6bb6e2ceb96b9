#ifndef SCHRO2D_RUNTIME_HPP
#define SCHRO2D_RUNTIME_HPP

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <thread>
#include <tuple>
#include <vector>

#include "schro2d/numerics.hpp"

namespace schro2d {

/// Chain of N workers; worker j owns strip j, edge e in 1..N-1 connects
/// workers e and e+1.
struct Topology {
    Index N = 1;
    Index edges() const { return N - 1; }
    void validate() const {
        if (N < 1) throw TopologyMismatch("worker count must be >= 1");
    }
};

/// Per-sweep payloads a worker hands to its neighbours. Empty vectors mean
/// "no neighbour on that side".
struct NeighborTraces {
    ComplexVector to_left;  // destined to worker j-1
    ComplexVector to_right; // destined to worker j+1
};

/// Neighbour swap with barrier semantics: outgoing[j-1].to_right becomes the
/// from-left input of worker j+1 and vice versa. Every interior edge must
/// carry exactly one payload per side.
struct IncomingTraces {
    ComplexVector from_left;
    ComplexVector from_right;
};

inline std::vector<IncomingTraces> exchange_traces(const Topology& topo, const std::vector<NeighborTraces>& outgoing) {
    topo.validate();
    if (static_cast<Index>(outgoing.size()) != topo.N) throw TopologyMismatch("one outgoing record per worker required");
    for (Index j = 1; j <= topo.N; ++j) {
        const NeighborTraces& o = outgoing[j - 1];
        if ((j > 1) != (o.to_left.size() > 0))
            throw TopologyMismatch("interior edge payload missing or unexpected on the left side");
        if ((j < topo.N) != (o.to_right.size() > 0))
            throw TopologyMismatch("interior edge payload missing or unexpected on the right side");
    }
    std::vector<IncomingTraces> incoming(topo.N);
    for (Index j = 1; j <= topo.N; ++j) {
        if (j > 1) incoming[j - 1].from_left = outgoing[j - 2].to_right;
        if (j < topo.N) incoming[j - 1].from_right = outgoing[j].to_left;
    }
    return incoming;
}

/// Fixed-order reduction: local squared norms summed by worker index, then
/// square root. Identical result regardless of arrival order.
inline double reduce_norm(const Topology& topo, std::span<const double> local_squared) {
    topo.validate();
    if (static_cast<Index>(local_squared.size()) != topo.N)
        throw TopologyMismatch("one squared-norm contribution per worker required");
    double sum = 0.0;
    for (Index j = 0; j < topo.N; ++j) sum += local_squared[j];
    return std::sqrt(sum);
}

/// Message for the transport adapter contract: exactly-once delivery per
/// (edge, direction, tag).
struct ExchangeMsg {
    Index sender = 0, receiver = 0;
    long iteration = 0;
    long time_step = 0;
    int direction = 0; // +1 rightward, -1 leftward
    ComplexVector payload;
};

/// In-process transport between chain neighbours. send never blocks; recv
/// blocks until the matching message arrives or the timeout expires.
class InProcessTransport {
public:
    explicit InProcessTransport(Topology topo, std::chrono::milliseconds timeout = std::chrono::milliseconds(30000))
        : topo_(topo), timeout_(timeout) {
        topo_.validate();
    }

    void send(Index edge, int direction, long iteration, long time_step, ComplexVector payload) {
        check_edge(edge, direction);
        const Key key{edge, direction, iteration, time_step};
        std::lock_guard<std::mutex> lock(mutex_);
        if (!box_.emplace(key, std::move(payload)).second)
            throw TopologyMismatch("duplicate message for (edge, tag)");
        cv_.notify_all();
    }

    ComplexVector recv(Index edge, int direction, long iteration, long time_step) {
        check_edge(edge, direction);
        const Key key{edge, direction, iteration, time_step};
        std::unique_lock<std::mutex> lock(mutex_);
        if (!cv_.wait_for(lock, timeout_, [&] { return box_.count(key) > 0; }))
            throw Timeout("trace exchange timed out");
        auto it = box_.find(key);
        ComplexVector payload = std::move(it->second);
        box_.erase(it);
        return payload;
    }

private:
    using Key = std::tuple<Index, int, long, long>;
    void check_edge(Index edge, int direction) const {
        if (edge < 1 || edge > topo_.edges()) throw TopologyMismatch("edge index out of range");
        if (direction != 1 && direction != -1) throw TopologyMismatch("direction must be +1 or -1");
    }
    Topology topo_;
    std::chrono::milliseconds timeout_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::map<Key, ComplexVector> box_;
};

enum class ExecMode { Sequential, Concurrent };

inline Index default_thread_cap() {
    if (const char* env = std::getenv("SCHRO_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<Index>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<Index>(hc) : 1;
}

/// Runs body(j) for workers j = 1..N, either round-robin in the calling
/// thread or on a pool of threads. Worker bodies must be independent; results
/// are bitwise identical across modes.
class WorkerPool {
public:
    WorkerPool(Index n_workers, ExecMode mode, Index max_threads = 0)
        : n_(n_workers), mode_(mode), threads_(max_threads > 0 ? max_threads : default_thread_cap()) {}

    ExecMode mode() const { return mode_; }

    void run(const std::function<void(Index)>& body) const {
        if (mode_ == ExecMode::Sequential || threads_ == 1 || n_ == 1) {
            for (Index j = 1; j <= n_; ++j) body(j);
            return;
        }
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        std::atomic<Index> next{1};
        const Index nthreads = std::min<Index>(threads_, n_);
        pool.reserve(nthreads);
        for (Index t = 0; t < nthreads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const Index j = next.fetch_add(1);
                    if (j > n_) return;
                    try {
                        body(j);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

private:
    Index n_;
    ExecMode mode_;
    Index threads_;
};

/// Round-robin execution of all workers in one thread of control.
inline void run_sequential(const Topology& topo, const std::function<void(Index)>& body) {
    topo.validate();
    WorkerPool(topo.N, ExecMode::Sequential).run(body);
}

} // namespace schro2d

#endif
