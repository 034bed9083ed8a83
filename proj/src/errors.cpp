#include "gazeclip/errors.hpp"

namespace gazeclip {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kDimension: return "dimension";
        case ErrorKind::kDomain: return "domain";
        case ErrorKind::kContract: return "contract";
        case ErrorKind::kNumeric: return "numeric";
        case ErrorKind::kData: return "data";
        case ErrorKind::kProtocol: return "protocol";
        case ErrorKind::kConfig: return "config";
        case ErrorKind::kVersion: return "version";
        case ErrorKind::kVerification: return "verification";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kData:
        case ErrorKind::kVersion: return 2;
        case ErrorKind::kProtocol: return 3;
        case ErrorKind::kVerification: return 4;
        default: return 1;
    }
}

}  // namespace gazeclip
