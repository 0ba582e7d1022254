#pragma once

#include <stdexcept>
#include <string>

namespace synsql {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schema ingestion and analysis.
struct ParseError : Error { using Error::Error; };
struct SchemaIntegrityError : Error { using Error::Error; };
struct AnalysisError : Error { using Error::Error; };

// Gateway.
struct BackendUnavailable : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct FixtureMiss : Error { using Error::Error; };
struct AllSlotsFailed : Error { using Error::Error; };

// Pipeline.
struct EmptySelection : Error { using Error::Error; };
struct EmptyDatabase : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace synsql
