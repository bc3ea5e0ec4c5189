#pragma once

#include <string>

namespace factsteer::eval::prompts {

// Question-only form shared by every method when history is withheld.
inline std::string without_history(const std::string& question) {
  return "Question: " + question + "\nAnswer:";
}

inline std::string rag(const std::string& history_chats, const std::string& current_date,
                       const std::string& question) {
  return "I will give you several history chats between you and a user. Please answer the "
         "question based on the relevant chat history.\n\n"
         "History Chats: " + history_chats + "\n"
         "Current Date: " + current_date + "\n" +
         without_history(question);
}

inline std::string dpl(const std::string& analysis, const std::string& all_user_utterances,
                       const std::string& question) {
  return "I will give you several history chats between you and a user. Please answer the "
         "question based on the relevant chat history.\n\n"
         "To help you generate your answer, here is a DPL (Difference-aware Personalization "
         "Learning) analysis of this user's typical cognitive context. Use this as a strategic "
         "clue to understand the nature of the user's interactions.\n\n"
         "DPL Context Analysis: " + analysis + "\n"
         "History Chats: " + all_user_utterances + "\n" +
         without_history(question);
}

inline std::string pag(const std::string& summary, const std::string& session_content,
                       const std::string& question) {
  return "I will give you a user profile summary and a single chat history between you and a "
         "user. Please answer the question based on the relevant chat history and the user "
         "profile summary.\n\n"
         "Summary: " + summary + "\n"
         "History Chats:\n"
         "Session 1:\n"
         "Session Content: " + session_content + "\n" +
         without_history(question);
}

inline std::string llm_trsr(const std::string& summary, const std::string& question) {
  return "I will give you a summary of the history chats between you and a user. Please answer "
         "the question based on the provided summary.\n\n"
         "User Summary: " + summary + "\n" +
         without_history(question);
}

inline std::string judge(const std::string& question, const std::string& correct_answer,
                         const std::string& model_response) {
  return "I will give you a question, a correct answer, and a response from a model. Please "
         "answer yes if the response contains the correct answer. Otherwise, answer no. If the "
         "response is equivalent to the correct answer or contains all the intermediate steps "
         "to get the correct answer, you should also answer yes. If the response only contains "
         "a subset of the information required by the answer, answer no.\n\n"
         "Question: " + question + "\n"
         "Correct Answer: " + correct_answer + "\n"
         "Model Response: " + model_response + "\n\n"
         "Is the model response correct? Answer yes or no only.";
}

// ---- summarizer prompts (not given by the templates above) ----------------

inline std::string profile_summary(const std::string& history) {
  return "Summarize the following chat history into a concise profile of the user's "
         "background, preferences and recurring topics.\n\n"
         "History Chats: " + history + "\n"
         "Summary:";
}

inline std::string recurrent_summary(const std::string& previous, const std::string& block) {
  return "Here is the current summary of a user and a new block of their history chats. "
         "Update the summary so that it reflects both.\n\n"
         "Current Summary: " + previous + "\n"
         "New History Chats: " + block + "\n"
         "Updated Summary:";
}

inline std::string dpl_analysis(const std::string& representative, const std::string& target) {
  return "Below are the history chats of a representative user from a group of similar users, "
         "followed by the history chats of a target user from the same group. Describe what "
         "distinguishes the target user from the representative user.\n\n"
         "Representative User Chats: " + representative + "\n"
         "Target User Chats: " + target + "\n"
         "Analysis:";
}

// ---- controlled simulation -------------------------------------------------

inline constexpr const char* kSentinel = "END_OF_LEARNING";

inline std::string teacher_control() {
  return "You are a helpful and factual AI assistant. Answer the question in detail. Explain it "
         "step by step as if you are teaching a beginner.";
}

inline std::string teacher_personalized(const std::string& history) {
  return "History Chats: " + history + "\n"
         "Please answer the question based on the relevant chat history concisely.";
}

inline std::string student() {
  return "You are 'Xiaoming', a curious but cautious middle school student. Your goal is to fully "
         "understand the topic your teacher is explaining.\n\n"
         "Your task is to follow these rules strictly:\n\n"
         "After the teacher gives an answer, you MUST evaluate if you have fully understood it.\n\n"
         "If you have any doubts, are confused, or want more details, you MUST ask a specific "
         "follow-up question. Do not simply say \"I understand\".\n\n"
         "If and only if you are completely confident that you have no more questions and have "
         "fully understood the topic, your response MUST end with the exact, standalone phrase on "
         "a new line: END_OF_LEARNING. This is a special command, not a sentence.";
}

inline std::string final_exam(const std::string& question, const std::string& conversation_log) {
  return "You are 'Xiaoming', a student who has just finished a tutoring session.\n"
         "Based ONLY on the entire conversation history provided below, give your final, "
         "concise, and definitive answer to the original question.\n\n"
         "Original Question: " + question + "\n"
         "Full Conversation History: " + conversation_log + "\n\n"
         "Your Final Answer:";
}

inline std::string sim_judge(const std::string& question, const std::string& right_answer,
                             const std::string& student_answer) {
  return "You are a strict and impartial evaluator. Your task is to determine if the student's "
         "answer is factually correct based on the provided ground truth.\n\n"
         "Original Question: " + question + "\n"
         "Ground Truth Answer: " + right_answer + "\n"
         "Student's Final Answer: " + student_answer + "\n\n"
         "Is the \"Student's Final Answer\" factually correct and consistent with the \"Ground "
         "Truth Answer\"?\n"
         "Respond with only the single word: Correct or Incorrect.";
}

}  // namespace factsteer::eval::prompts
