#pragma once

#include <stdexcept>
#include <string>

namespace lml {

// Malformed input: bad schema, bad CSV row, unknown label, mismatched graph.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A quantity is requested outside its domain, e.g. the log of a zero
// marginal probability.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace lml
