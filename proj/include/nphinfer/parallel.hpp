#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <random>
#include <type_traits>

namespace nphinfer {

// Independent engine for a (seed, a, b) coordinate. Streams are keyed by
// position, not by thread, so results do not depend on the worker count.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Worker count: explicit request if > 0, else NPH_INFER_THREADS, else the
// hardware concurrency. Never more than `tasks`, never less than 1.
unsigned worker_count(std::size_t tasks, unsigned requested = 0);

namespace detail {
void run_workers(std::size_t n, unsigned workers, void (*body)(void*, std::size_t), void* ctx);
}

// Calls f(i) for i in [0, n). The first exception thrown is rethrown after
// all workers stop.
template <class F>
void parallel_for(std::size_t n, F&& f, unsigned requested = 0) {
  using Fn = std::remove_reference_t<F>;
  auto body = [](void* ctx, std::size_t i) { (*static_cast<Fn*>(ctx))(i); };
  detail::run_workers(n, worker_count(n, requested), body, const_cast<void*>(static_cast<const void*>(&f)));
}

}  // namespace nphinfer
