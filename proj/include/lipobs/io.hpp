#pragma once

// Plant and design files: line-oriented "key = <JSON value>" text with a leading
// "format=1" line. Numbers are written in their shortest round-trip decimal form so
// that every double survives a write/read cycle bit-exactly. See docs/formats.md.

#include <iosfwd>
#include <optional>
#include <string>

#include "lipobs/synthesis.hpp"

namespace lipobs::io {

inline constexpr int kFormatVersion = 1;

// Matrices and phi in original coordinates. When transform is present, designs are
// computed for x_bar = T x and gamma refers to the transformed nonlinearity.
struct PlantFile {
    PlantModel model;
    std::optional<Matrix> transform;

    // The model the synthesis runs on: transformed when T is present.
    [[nodiscard]] PlantModel design_model() const;
};

PlantFile read_plant(std::istream& in, const std::string& origin = "<plant>");
PlantFile load_plant(const std::string& path);
void write_plant(const PlantFile& plant, std::ostream& out);
void save_plant(const PlantFile& plant, const std::string& path);

struct DesignFile {
    ObserverDesign design;           // L, P in design coordinates
    std::optional<Matrix> transform;  // copied from the plant file
    std::optional<VerificationReport> verification;

    // T^{-1} L when a transform is present, else L.
    [[nodiscard]] Matrix original_gain() const;
};

DesignFile read_design(std::istream& in, const std::string& origin = "<design>");
DesignFile load_design(const std::string& path);
void write_design(const DesignFile& design, std::ostream& out);
void save_design(const DesignFile& design, const std::string& path);

// Inverse of to_string(Theorem).
std::optional<Theorem> parse_theorem(const std::string& key);

}  // namespace lipobs::io
