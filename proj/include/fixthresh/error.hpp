#ifndef FIXTHRESH_ERROR_HPP
#define FIXTHRESH_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fixthresh {

// Error categories. Values are kept in sync with the ft_status codes in the
// C header (fixthresh.h).
enum class ErrorCode : int {
  invalid_argument = 1,
  io = 2,
  format = 3,
  metric_domain = 4,
  protocol = 5,
  stats = 6,
  model = 7,
  transform = 8,
  generation = 9,
  pipeline = 10,
  internal = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) raise(code, msg);
}

}  // namespace fixthresh

#endif
