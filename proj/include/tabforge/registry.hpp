#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tabforge {

enum class Direction { InstructionComplication, InstructionGeneralization, TableGeneralization };

inline constexpr Direction kAllDirections[] = {Direction::InstructionComplication,
                                               Direction::InstructionGeneralization,
                                               Direction::TableGeneralization};

enum class Strategy {
    AddConstraints,
    IncreaseDepth,
    AddReasoningSteps,
    AddTaskNumber,
    AddDetails,
    IncreaseLength,
    AddContext,
    NewInstruction,
    SimilarInstruction,
    ChangeFormat,
    ModifyHeader,
    ModifyData,
    OrderPermutation,
    InsertRemoveData,
};

struct StrategyInfo {
    Strategy id;
    Direction direction;
    std::string_view key;   // "AddTaskNumber"
    std::string_view name;  // "Add Task Number"
    std::string_view description;
};

/// All 14 strategies, grouped by direction in a fixed order.
std::span<const StrategyInfo> strategies();
const StrategyInfo& info(Strategy s);
std::vector<Strategy> strategies_of(Direction d);

std::string_view to_string(Direction d);
std::string_view to_string(Strategy s);
Direction direction_from_string(std::string_view key);
Strategy strategy_from_string(std::string_view key);

/// Uniform over the direction's strategies.
Strategy sample_strategy(Direction d, std::mt19937_64& rng);

enum class TaskCategory { TQA, T2T, StructureUnderstanding, DataManipulation, TableProcessing };

std::string_view to_string(TaskCategory c);

struct SeedTask {
    TaskCategory category;
    std::string_view name;
    std::string_view description;
};

/// The 20 seed tasks.
std::span<const SeedTask> seed_tasks();
const SeedTask* find_seed_task(std::string_view name);

}  // namespace tabforge
