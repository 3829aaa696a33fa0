#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace evdet {

// All failures carry a short machine-parsable category ("MalformedHeader",
// "ZeroVariance", ...) plus a human message. The CLI prints "Category: message"
// on a single line and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(category + ": " + message),
        category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

}  // namespace evdet
