#pragma once

#include <stdexcept>
#include <string>

namespace padbench {

// Base for every error the library raises on purpose.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition or domain violation (empty input, value out of range, ...).
struct domain_error : error {
  using error::error;
};

// File missing, unreadable or unwritable.
struct io_error : error {
  using error::error;
};

// Corrupt or incompatible persisted artifact.
struct format_error : error {
  using error::error;
};

// Missing or inconsistent configuration (e.g. no backbone checkpoint).
struct config_error : error {
  using error::error;
};

// Filename grammar violation.
struct parse_error : error {
  using error::error;
};

}  // namespace padbench
