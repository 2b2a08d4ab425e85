#ifndef MRABGCN_DIAGNOSTICS_HPP
#define MRABGCN_DIAGNOSTICS_HPP

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mrabgcn {

/// Raised when operand shapes do not conform.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a documented precondition is violated.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for malformed input files; messages carry the file and line.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(std::string_view)>;

/// Emits a non-fatal warning through the installed handler (stderr by default).
void warn(std::string_view message);

/// Installs a handler and returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);

/// Collects warnings for the lifetime of the object; restores the previous
/// handler on destruction.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    [[nodiscard]] std::size_t count() const { return messages_.size(); }
    [[nodiscard]] bool contains(std::string_view fragment) const;

private:
    std::vector<std::string> messages_;
    WarningHandler previous_;
};

} // namespace mrabgcn

#endif // MRABGCN_DIAGNOSTICS_HPP
