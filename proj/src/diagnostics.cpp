#include "mrabgcn/diagnostics.hpp"

#include <iostream>
#include <vector>

namespace mrabgcn {

namespace {

WarningHandler& handler_slot() {
    static WarningHandler handler = [](std::string_view message) {
        std::cerr << "warning: " << message << '\n';
    };
    return handler;
}

} // namespace

void warn(std::string_view message) {
    if (auto& handler = handler_slot()) {
        handler(message);
    }
}

WarningHandler set_warning_handler(WarningHandler handler) {
    auto previous = std::move(handler_slot());
    handler_slot() = std::move(handler);
    return previous;
}

WarningCapture::WarningCapture() {
    previous_ = set_warning_handler([this](std::string_view message) { messages_.emplace_back(message); });
}

WarningCapture::~WarningCapture() { set_warning_handler(std::move(previous_)); }

bool WarningCapture::contains(std::string_view fragment) const {
    for (const auto& message : messages_) {
        if (message.find(fragment) != std::string::npos) {
            return true;
        }
    }
    return false;
}

} // namespace mrabgcn
