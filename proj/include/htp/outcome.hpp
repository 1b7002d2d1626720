#pragma once

#include <utility>
#include <variant>

#include "htp/error.hpp"

namespace htp {

/// A value or the Error that prevented it. Used for per-slot results where a
/// single failure must not abort the surrounding batch.
template <class T>
class Outcome {
public:
    Outcome(T value) : state_(std::move(value)) {}
    Outcome(Error error) : state_(std::move(error)) {}

    bool ok() const noexcept { return std::holds_alternative<T>(state_); }
    explicit operator bool() const noexcept { return ok(); }

    const T& value() const& {
        if (!ok()) throw std::get<Error>(state_);
        return std::get<T>(state_);
    }
    T&& value() && {
        if (!ok()) throw std::get<Error>(state_);
        return std::get<T>(std::move(state_));
    }

    const Error& error() const& { return std::get<Error>(state_); }

private:
    std::variant<T, Error> state_;
};

}  // namespace htp
