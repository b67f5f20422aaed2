#pragma once

#include <stdexcept>
#include <string>

namespace mstile {

// One exception type for the whole library; `kind` lets callers and tests
// distinguish failure classes without string matching.
class Error : public std::runtime_error {
public:
    enum class Kind {
        file_missing,
        unsupported_format,
        corrupt_data,
        io_failure,
        invalid_argument,
        infeasible,
        single_class,
        scorer_contract,
        config_invalid,
    };

    Error(Kind k, const std::string& msg) : std::runtime_error(msg), kind_(k) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

[[noreturn]] inline void fail(Error::Kind k, const std::string& msg) { throw Error(k, msg); }

} // namespace mstile
