#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mindos {

enum class ErrorCode {
    // kernel / parsing
    Malformed,
    // working memory
    SeqRegression,
    EmptyInstructions,
    CorruptSnapshot,
    // foundation model
    DuplicateModelId,
    UnknownModel,
    NoModels,
    InvalidTemplate,
    ProviderUnreachable,
    NoRuleAndNoDefault,
    // tools
    MalformedDocument,
    MissingOperationId,
    UnsupportedParamType,
    DuplicateToolId,
    UnknownTool,
    MissingRequiredParam,
    TypeMismatch,
    UpstreamError,
    UnknownBinding,
    UnknownField,
    // memory
    DuplicateDoc,
    PolicyDenied,
    // driver / monitor
    NoCurrentGoal,
    EmptyStack,
    DuplicateTriggerId,
    // orchestrator
    UnknownAgent,
    UnknownSession,
    SessionHalted,
    WrongMode,
    InvalidConfig,
    // lui
    EmptyResponse,
    UnknownElement,
    // persistence
    NotFound,
    CorruptState,
    VersionUnsupported,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    explicit Error(ErrorCode code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace mindos
