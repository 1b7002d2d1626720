#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <span>
#include <thread>
#include <type_traits>
#include <vector>

#include "htp/error.hpp"
#include "htp/outcome.hpp"

namespace htp {

/// Applies `fn` to every item with at most `parallelism` calls in flight.
/// Result i always belongs to item i; exceptions are captured in their slot.
template <class In, class Fn>
auto parallel_map(std::span<const In> items, int parallelism, Fn&& fn)
    -> std::vector<Outcome<std::invoke_result_t<Fn&, const In&>>> {
    using Out = std::invoke_result_t<Fn&, const In&>;
    if (parallelism < 1) throw Error(ErrorKind::InvalidArgument, "parallelism must be >= 1");

    std::vector<std::optional<Outcome<Out>>> slots(items.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
            try {
                slots[i].emplace(fn(items[i]));
            } catch (const Error& e) {
                slots[i].emplace(e);
            } catch (const std::exception& e) {
                slots[i].emplace(Error(ErrorKind::BadResponse, e.what()));
            }
        }
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(parallelism), items.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    std::vector<Outcome<Out>> results;
    results.reserve(slots.size());
    for (auto& slot : slots) results.push_back(std::move(*slot));
    return results;
}

}  // namespace htp
