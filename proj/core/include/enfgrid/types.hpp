#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "enfgrid/errors.hpp"

namespace enfgrid {

enum class RecType : std::uint8_t { Audio, Power, Unknown };
enum class Nominal : std::uint8_t { Hz50, Hz60 };

// Grid labels A..I plus the open-set "None" verdict.
enum class Grid : std::uint8_t { A, B, C, D, E, F, G, H, I, N };

inline constexpr std::size_t kNumGrids = 9;   // A..I
inline constexpr std::size_t kNumVerdicts = 10; // A..I plus N

// The 60 Hz grids and the 50 Hz grids, in class-index order.
inline constexpr std::array<Grid, 3> kClasses60 = {Grid::A, Grid::C, Grid::I};
inline constexpr std::array<Grid, 6> kClasses50 = {Grid::B, Grid::D, Grid::E,
                                                   Grid::F, Grid::G, Grid::H};

double nominal_hz(Nominal nominal);
Nominal grid_nominal(Grid grid); // throws ConfigInvalid for Grid::N

char grid_letter(Grid grid);
Grid grid_from_letter(char letter);

const char* rec_type_name(RecType type);
RecType rec_type_from_name(const std::string& name);

const char* nominal_name(Nominal nominal);
Nominal nominal_from_name(const std::string& name);

// One of the four independent classification problems.
struct DataGroupId {
    RecType rec_type = RecType::Audio;
    Nominal nominal = Nominal::Hz50;

    bool operator==(const DataGroupId&) const = default;
    auto operator<=>(const DataGroupId&) const = default;
};

std::size_t group_num_classes(const DataGroupId& group); // 3 for Hz60, 6 for Hz50
std::string group_name(const DataGroupId& group);        // e.g. "audio60"
DataGroupId group_from_name(const std::string& name);

// Class index <-> grid letter within one group's label space.
Grid group_class_grid(const DataGroupId& group, std::size_t class_index);
std::size_t group_grid_class(const DataGroupId& group, Grid grid); // throws LabelOutOfRange

} // namespace enfgrid
