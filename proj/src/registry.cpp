#include "tabforge/registry.hpp"

#include <array>
#include <stdexcept>

#include <fmt/format.h>

namespace tabforge {

namespace {

using D = Direction;
using S = Strategy;

constexpr std::array<StrategyInfo, 14> kStrategies{{
    {S::AddConstraints, D::InstructionComplication, "AddConstraints", "Add Constraints",
     "Attach one extra condition, requirement or constraint that the answer has to respect."},
    {S::IncreaseDepth, D::InstructionComplication, "IncreaseDepth", "Increase Depth",
     "Ask for deeper understanding: turn a surface-level question into one that needs insight, or replace a "
     "simple lookup or calculation with a harder quantitative problem."},
    {S::AddReasoningSteps, D::InstructionComplication, "AddReasoningSteps", "Add Reasoning Steps",
     "Make the task require a longer chain of intermediate steps, so that a question solvable in one or two "
     "moves now needs several."},
    {S::AddTaskNumber, D::InstructionComplication, "AddTaskNumber", "Add Task Number",
     "Combine several demands in one instruction so the model must carry out more than one task; list the "
     "demands as a Markdown list."},
    {S::AddDetails, D::InstructionComplication, "AddDetails", "Add Details",
     "Swap vague or general wording for concrete, specific entities, columns, periods or quantities."},
    {S::IncreaseLength, D::InstructionComplication, "IncreaseLength", "Increase Length",
     "Write the instruction as a longer request spread over several lines or paragraphs."},
    {S::AddContext, D::InstructionComplication, "AddContext", "Add Context",
     "Supply extra input next to the table, such as background text, a code snippet, worked examples or "
     "additional data, and make the task depend on it."},
    {S::NewInstruction, D::InstructionGeneralization, "NewInstruction", "New Instruction",
     "Use the example only as inspiration and write an instruction for a different kind of task on the same "
     "table."},
    {S::SimilarInstruction, D::InstructionGeneralization, "SimilarInstruction", "Similar Instruction",
     "Write another instruction of the same task type and intent as the example, asking about different "
     "content of the table."},
    {S::ChangeFormat, D::TableGeneralization, "ChangeFormat", "Change Format",
     "Rewrite the same table in the requested target format without changing its content."},
    {S::ModifyHeader, D::TableGeneralization, "ModifyHeader", "Modify Header",
     "Reword some row or column headers into equivalent headers, for example by using synonyms."},
    {S::ModifyData, D::TableGeneralization, "ModifyData", "Modify Data",
     "Replace the table body with different, varied values; some values may be marked as missing."},
    {S::OrderPermutation, D::TableGeneralization, "OrderPermutation", "Order Permutation",
     "Shuffle the order of data rows and data columns while keeping headers attached to their data."},
    {S::InsertRemoveData, D::TableGeneralization, "InsertRemoveData", "Insert/Remove Data",
     "Add some new rows or columns, or delete some existing ones."},
}};

constexpr std::array<SeedTask, 20> kSeedTasks{{
    {TaskCategory::TQA, "Numerical reasoning problem",
     "Answer a question that needs arithmetic over numbers in the table, such as sums, differences, averages "
     "or growth rates."},
    {TaskCategory::TQA, "Information seeking problem", "Locate and report the cell values a question asks for."},
    {TaskCategory::TQA, "Multihop reasoning problem",
     "Answer a question that needs several lookups chained together, where each step depends on the previous "
     "one."},
    {TaskCategory::TQA, "Time calculation problem",
     "Compare dates or times in the table or compute durations between them."},
    {TaskCategory::TQA, "Table-based fact verification",
     "Judge whether a given statement is supported or contradicted by the table."},
    {TaskCategory::T2T, "Table description", "Describe what the table contains in detail."},
    {TaskCategory::T2T, "Table summarization", "Write a summary of the most important information in the table."},
    {TaskCategory::T2T, "Table analysis",
     "Act as a data analyst and discuss the main trends, outliers and patterns in the data."},
    {TaskCategory::StructureUnderstanding, "Table size detection", "Report how many rows and columns the table has."},
    {TaskCategory::StructureUnderstanding, "Table cell extraction",
     "Given cell positions as row and column numbers, return the text of those cells."},
    {TaskCategory::StructureUnderstanding, "Table cell location",
     "Given some cell texts, report where they are as row and column numbers."},
    {TaskCategory::StructureUnderstanding, "Row&Column extraction",
     "Given row or column numbers, return all the text in those rows or columns."},
    {TaskCategory::StructureUnderstanding, "Merged cell detection",
     "Say whether the table has merged cells and, if so, give the position of each one."},
    {TaskCategory::DataManipulation, "Data formating",
     "Change how some values are written, following the user's formatting rules."},
    {TaskCategory::DataManipulation, "Data cleaning",
     "Find and fix problems in the table such as typos, duplicates or invalid characters."},
    {TaskCategory::DataManipulation, "Data filtering", "Keep only the rows or columns that satisfy given criteria."},
    {TaskCategory::DataManipulation, "Data classification",
     "Assign table entries to categories the user defines, for instance labelling reviews as positive or "
     "negative."},
    {TaskCategory::DataManipulation, "Data sorting", "Sort the table data in ascending or descending order as requested."},
    {TaskCategory::TableProcessing, "Table modification",
     "Apply the requested edits to the whole table and return the edited table."},
    {TaskCategory::TableProcessing, "Format transformation",
     "Convert the table into another format the user asks for, such as LaTeX."},
}};

}  // namespace

std::span<const StrategyInfo> strategies() { return kStrategies; }

const StrategyInfo& info(Strategy s) { return kStrategies[static_cast<std::size_t>(s)]; }

std::vector<Strategy> strategies_of(Direction d) {
    std::vector<Strategy> out;
    for (const auto& s : kStrategies) {
        if (s.direction == d) out.push_back(s.id);
    }
    return out;
}

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::InstructionComplication: return "InstructionComplication";
        case Direction::InstructionGeneralization: return "InstructionGeneralization";
        case Direction::TableGeneralization: return "TableGeneralization";
    }
    return "InstructionComplication";
}

std::string_view to_string(Strategy s) { return info(s).key; }

Direction direction_from_string(std::string_view key) {
    for (Direction d : kAllDirections) {
        if (to_string(d) == key) return d;
    }
    throw std::invalid_argument(fmt::format("unknown direction '{}'", key));
}

Strategy strategy_from_string(std::string_view key) {
    for (const auto& s : kStrategies) {
        if (s.key == key) return s.id;
    }
    throw std::invalid_argument(fmt::format("unknown strategy '{}'", key));
}

Strategy sample_strategy(Direction d, std::mt19937_64& rng) {
    const auto pool = strategies_of(d);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
}

std::string_view to_string(TaskCategory c) {
    switch (c) {
        case TaskCategory::TQA: return "Table Question Answering";
        case TaskCategory::T2T: return "Table-to-text Generation";
        case TaskCategory::StructureUnderstanding: return "Table Structure Understanding";
        case TaskCategory::DataManipulation: return "Data Manipulation";
        case TaskCategory::TableProcessing: return "Table Processing";
    }
    return "Table Question Answering";
}

std::span<const SeedTask> seed_tasks() { return kSeedTasks; }

const SeedTask* find_seed_task(std::string_view name) {
    for (const auto& t : kSeedTasks) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

}  // namespace tabforge
