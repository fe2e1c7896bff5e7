#include "patchleak/errors.hpp"

namespace patchleak {

MalformedRecord::MalformedRecord(std::string file, std::size_t line, std::string field, const std::string& reason)
    : Error(file + ":" + std::to_string(line) + ": field '" + field + "': " + reason),
      file_(std::move(file)),
      line_(line),
      field_(std::move(field)) {}

}  // namespace patchleak
