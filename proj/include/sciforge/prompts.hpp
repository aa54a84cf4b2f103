#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sciforge::prompts {

/// Instruction template wrapped around every question before generation.
/// Placeholders: <SUBJECT>, <QUESTION>.
extern const std::string_view kInstructionTemplate;

/// Final-answer verification prompt for the generative verifier.
/// Placeholders: <QUESTION>, <REF_ANSWER>, <GEN_ANSWER>.
extern const std::string_view kAnswerVerificationTemplate;

/// Rubric generation prompt. Placeholders: <SUBJECT>, <QUESTION>,
/// <REF_ANSWER>.
extern const std::string_view kRubricGenerationTemplate;

/// System prompt for judging a single rubric item. No placeholders.
extern const std::string_view kRubricJudgeSystemPrompt;

/// User message template for judging a single rubric item.
/// Placeholders: <QUESTION>, <RUBRIC_ITEM>, <RESPONSE>.
extern const std::string_view kRubricJudgeUserTemplate;

/// Replaces every occurrence of each placeholder with its value. Values
/// are inserted verbatim; no escaping.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string_view>>& subs);

std::string render_instruction(std::string_view subject_label, std::string_view question);
std::string render_answer_verification(std::string_view question, std::string_view reference_answer,
                                       std::string_view candidate_answer);
std::string render_rubric_generation(std::string_view subject_label, std::string_view question,
                                     std::string_view reference_answer);
std::string render_rubric_judge_user(std::string_view question, std::string_view rubric_item,
                                     std::string_view response);

}  // namespace sciforge::prompts
