#pragma once

#include <stdexcept>
#include <string>

namespace cryosr {

// Error taxonomy surfaced by the CLI as machine-parsable one-liners.
// config_error covers bad arguments, bad config keys and precondition
// violations; io_error covers file system and format problems;
// numeric_error covers runtime numerical failures (degenerate inputs,
// non-finite losses).

class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cryosr
