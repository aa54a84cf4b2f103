#include "sciforge/prompts.hpp"

namespace sciforge::prompts {

const std::string_view kInstructionTemplate =
    R"PROMPT(Solve the following <SUBJECT> problem step by step. The last line of your response should be of the form: `The final answer is: \boxed{ANSWER}' (without quotes) where ANSWER is your answer.

<QUESTION>)PROMPT";

const std::string_view kAnswerVerificationTemplate =
    R"PROMPT(You are a strict academic evaluator. Compare the candidate answer with the reference answer to determine if they are equivalent in correctness and completeness.

First, analyze the answers step by step:
1. Check if the candidate answer is complete and meaningful (not just placeholders, variables, or incomplete expressions)
2. Identify the key points in the reference answer
3. Check if the candidate answer contains all these key points
4. Verify the factual accuracy of the candidate answer
5. Assess whether the candidate answer adequately addresses the question

The candidate answer should be considered correct ONLY if:
- It is a complete, meaningful answer (not just placeholders like "$ANSWER", "X", "$", or similar)
- It contains all the key points from the reference answer
- The information is factually accurate
- It adequately addresses the question asked

Answer "No" if the candidate answer:
- Is just a placeholder, variable, or incomplete expression (e.g., "$ANSWER", "X", "$", "ANSWER", etc.)
- Is missing important key points from the reference answer
- Contains factual errors or inaccuracies
- Is significantly incomplete compared to the reference
- Uses different terminology that changes the meaning
- Only partially addresses the question
- Is empty, contains only whitespace, or is clearly malformed

Be strict in your evaluation. When in doubt, answer "No". Pay special attention to placeholder-like answers that appear to be formatting artifacts rather than actual solutions.

After your analysis, provide your final decision in the format: Final Decision: \boxed{Yes} or Final Decision: \boxed{No}

## Question:
<QUESTION>)PROMPT"
    "\n\n## Reference Answer: \n<REF_ANSWER>"
    "\n\n## Candidate Answer: \n<GEN_ANSWER>";

const std::string_view kRubricGenerationTemplate =
    R"PROMPT(You are an expert rubric designer for scientific reasoning questions. Your job is to generate a self-contained set of evaluation criteria or "rubrics" for judging how good a response is to a given question in one of STEM subjects (math, physics, chemistry, biology, medicine, cs, economics). Rubrics should  cover aspects such as factual correctness, depth of reasoning, clarity, logic correctness, completeness, style, helpfulness, and common pitfalls. Each rubric item must be fully self-contained so that non-expert readers need not consult any external information.

\textbf{Inputs:}
\begin{itemize}
  \item \texttt{subject}: <SUBJECT>
  \item \texttt{question}: <QUESTION>
  \item \texttt{reference_answer}: <REF_ANSWER>
\end{itemize}

\textbf{Total items:}
\begin{itemize}
  \item Choose 7-10 rubric items based on question complexity.
\end{itemize}

Each rubric item must include exactly three keys:
\begin{enumerate}
  \item \textbf{title}: 2-4 words summarization
  \item \textbf{description}: One sentence explicitly stating what to look for. For example:
    \begin{itemize}
      \item States that in the described closed system, the total mechanical energy (kinetic plus potential) before the event equals the total mechanical energy after the event.
      \item Breaks down numerical energy values for each stage, demonstrating that initial kinetic energy plus initial potential energy equals final kinetic energy plus final potential energy.
      \item Provides a concrete example, such as a pendulum converting between kinetic and potential energy, to illustrate how energy shifts within the system.
      \item Does not mention that frictional or air-resistance losses are assumed negligible when applying conservation of mechanical energy.
    \end{itemize}
  \item \textbf{category}: one from "Essential", "Important", "Optional", or "Pitfall" indicating the type of the rubric item
\end{enumerate}

\textbf{Category guidance:}
\begin{itemize}
  \item Essential: critical fact or step; omission invalidates the
answer.
  \item Important: key information or reasoning; absence
severely weakens the response.
  \item Optional: secondary details or actions; doesn't directly
affects correctness.
  \item Pitfall: common but vital mistakes; must be penalized
if exist.
\end{itemize}

\textbf{Format notes:}
\begin{itemize}
  \item When referring to answer choices, explicitly say "Identifies (A)", "Identifies (B)", etc.
  \item If a clear conclusion is required (e.g. "The final answer is (B)"), include an Essential Criteria for it.
  \item If reasoning should precede the final answer, include an Important Criteria to that effect.
  \item If brevity is valued, include an Optional Criteria about conciseness.
\end{itemize}

)PROMPT"
    "\\textbf{Output:}  \n"
    R"PROMPT(Provide a JSON array of rubric objects as your final result after reasoning. Each object must contain exactly three keys-title, description, and category. Do not copy large blocks of the question or reference_answer into the text. Each description must begin with its category prefix, and no extra keys are allowed.

Now, given the question and reference_answer, generate the rubric as described. The reference answer is an ideal response but not necessarily exhaustive; use it only as guidance. You may try to solve the problem if you think it is necessary.)PROMPT";

const std::string_view kRubricJudgeSystemPrompt =
    R"PROMPT(You are an academic evaluator verifying whether a candidate response meets a specific rubric criterion.

**Task**: Provide a binary verification (Yes/No) on whether the response satisfies the given rubric item.

**Rubric Criterion Types**:
1. **Essential**: Critical requirements that must be present for a good response
2. **Important**: Significant requirements that should be present for quality
3. **Optional**: Nice-to-have requirements that enhance response quality
4. **Pitfall**: Common mistakes or faults that should NOT be present in the response

**Evaluation Instructions by Type**:
- **For Essential/Important/Optional criteria**: Check if the response demonstrates the required positive behavior or includes the specified element. Output "Yes" if the good behavior is present, "No" if absent.
- **For Pitfall criteria**: Check if the response contains the specified fault or bad behavior. Output "Yes" if the fault EXISTS (response fails this criterion), "No" if the fault does NOT exist (response passes this criterion).

**Evaluation Guidelines**:
1. **Focus**: Only evaluate the specific rubric criterion - not overall correctness or other aspects
2. **Evidence Required**: Look for explicit evidence that demonstrates compliance with the rubric requirement
3. **Standards**: The response must explicitly demonstrate the required element (for positive criteria) or explicitly avoid the specified fault (for pitfall criteria)
4. **Quality Indicators**: Clear reasoning, proper application of specified approaches, conscious addressing of the criterion

**Response Format**:
- Brief analysis of how the response meets (or fails to meet) the rubric criterion
- For Pitfall criteria: Clearly state whether the specified fault is present or absent
- Focus only on the specified rubric item
- Conclude with: Final Decision: \boxed{Yes} or Final Decision: \boxed{No})PROMPT";

const std::string_view kRubricJudgeUserTemplate =
    R"PROMPT(Given the following question, rubric criterion, and candidate response, please rate whether the response satisfies the rubric criterion with a binary decision (Yes/No).

# Question:
<QUESTION>


# Rubric:
<RUBRIC_ITEM>


# Response:
<RESPONSE>)PROMPT";

std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string_view>>& subs) {
    std::string out(tmpl);
    for (const auto& [placeholder, value] : subs) {
        size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string render_instruction(std::string_view subject_label, std::string_view question) {
    return render(kInstructionTemplate, {{"<SUBJECT>", subject_label}, {"<QUESTION>", question}});
}

std::string render_answer_verification(std::string_view question, std::string_view reference_answer,
                                       std::string_view candidate_answer) {
    return render(kAnswerVerificationTemplate, {{"<QUESTION>", question},
                                                {"<REF_ANSWER>", reference_answer},
                                                {"<GEN_ANSWER>", candidate_answer}});
}

std::string render_rubric_generation(std::string_view subject_label, std::string_view question,
                                     std::string_view reference_answer) {
    return render(kRubricGenerationTemplate, {{"<SUBJECT>", subject_label},
                                              {"<QUESTION>", question},
                                              {"<REF_ANSWER>", reference_answer}});
}

std::string render_rubric_judge_user(std::string_view question, std::string_view rubric_item,
                                     std::string_view response) {
    return render(kRubricJudgeUserTemplate, {{"<QUESTION>", question},
                                             {"<RUBRIC_ITEM>", rubric_item},
                                             {"<RESPONSE>", response}});
}

}  // namespace sciforge::prompts
