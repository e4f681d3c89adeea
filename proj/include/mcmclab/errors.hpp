#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mcmclab {

enum class Errc {
    NegativeEntry,
    RowSumOutOfTolerance,
    DimensionMismatch,
    NotIrreducible,
    SingularSystem,
    NotAbsorbing,
    EmptyTargetSet,
    EigensolverFailure,
    NonDiagonalizable,
    NotReversible,
    ZeroPiEntry,
    EmptySet,
    CertificateInvalid,
    NoValidDrift,
    EmptyK,
    AlphaZero,
    ParameterOutOfRange,
    DiagonalNegative,
    NoOppositePair,
    EmptyCorpus,
    TailMassTooLarge,
    SeriesDiverges,
    NotContracting,
    ParseError,
    InvalidArgument,
};

constexpr std::string_view errc_name(Errc e) {
    switch (e) {
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::RowSumOutOfTolerance: return "RowSumOutOfTolerance";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotIrreducible: return "NotIrreducible";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::NotAbsorbing: return "NotAbsorbing";
    case Errc::EmptyTargetSet: return "EmptyTargetSet";
    case Errc::EigensolverFailure: return "EigensolverFailure";
    case Errc::NonDiagonalizable: return "NonDiagonalizable";
    case Errc::NotReversible: return "NotReversible";
    case Errc::ZeroPiEntry: return "ZeroPiEntry";
    case Errc::EmptySet: return "EmptySet";
    case Errc::CertificateInvalid: return "CertificateInvalid";
    case Errc::NoValidDrift: return "NoValidDrift";
    case Errc::EmptyK: return "EmptyK";
    case Errc::AlphaZero: return "AlphaZero";
    case Errc::ParameterOutOfRange: return "ParameterOutOfRange";
    case Errc::DiagonalNegative: return "DiagonalNegative";
    case Errc::NoOppositePair: return "NoOppositePair";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::TailMassTooLarge: return "TailMassTooLarge";
    case Errc::SeriesDiverges: return "SeriesDiverges";
    case Errc::NotContracting: return "NotContracting";
    case Errc::ParseError: return "ParseError";
    case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

// Carries a machine-readable code plus the offending index/value when one exists.
class Error : public std::runtime_error {
public:
    Error(Errc code, std::string detail,
          std::optional<std::size_t> index = std::nullopt,
          std::optional<double> value = std::nullopt)
        : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
          code_(code), detail_(std::move(detail)), index_(index), value_(value) {}

    Errc code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    std::optional<std::size_t> index() const noexcept { return index_; }
    std::optional<double> value() const noexcept { return value_; }

private:
    Errc code_;
    std::string detail_;
    std::optional<std::size_t> index_;
    std::optional<double> value_;
};

[[noreturn]] inline void fail(Errc code, std::string detail,
                              std::optional<std::size_t> index = std::nullopt,
                              std::optional<double> value = std::nullopt) {
    throw Error(code, std::move(detail), index, value);
}

} // namespace mcmclab
