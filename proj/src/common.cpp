#include <cmath>
#include <iostream>
#include <numbers>
#include <utility>

#include "triage/log.hpp"
#include "triage/rng.hpp"

namespace triage {

double Rng::normal() {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

WarningHandler& handler_slot() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

}  // namespace

void warn(const std::string& message) {
  if (auto& h = handler_slot()) h(message);
}

WarningHandler set_warning_handler(WarningHandler handler) {
  return std::exchange(handler_slot(), std::move(handler));
}

WarningCapture::WarningCapture()
    : previous_(set_warning_handler([this](const std::string& m) { messages_.push_back(m); })) {}

WarningCapture::~WarningCapture() { set_warning_handler(std::move(previous_)); }

}  // namespace triage
