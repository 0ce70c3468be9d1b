#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace pkit {

using json = nlohmann::json;

// Raised for malformed data in a declared intermediate format (CLI exit 2).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised for bad configuration / unusable inputs (CLI exit 1).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a required external service is entirely unavailable (CLI exit 3).
struct ExternalServiceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Visits one parsed object per line. Malformed lines are counted in `skipped`
// and never abort the stream; blank lines are ignored silently.
void for_each_jsonl_lenient(std::istream& in,
                            const std::function<void(json&&)>& fn,
                            std::uint64_t& skipped);

// Strict variant for our own intermediate files: a malformed line is a DataError
// naming the line number.
void for_each_jsonl_strict(std::istream& in, const std::string& source_name,
                           const std::function<void(json&&)>& fn);

}  // namespace pkit
