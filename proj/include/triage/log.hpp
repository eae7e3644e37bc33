#pragma once

#include <functional>
#include <string>
#include <vector>

namespace triage {

using WarningHandler = std::function<void(const std::string&)>;

// Non-fatal conditions (empty test split, short candidate pools, ...) are
// reported here. The default handler prints "warning: <msg>" to stderr.
void warn(const std::string& message);

// Installs a handler and returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);

// RAII capture of warnings, mostly for tests.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

}  // namespace triage
