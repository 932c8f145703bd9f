#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include "factgap/language.h"
#include "factgap/retrieval.h"

namespace factgap {

namespace {

enum class Run { None, Word, Unsegmented, Digits };

bool is_letter(UChar32 c) {
    return u_hasBinaryProperty(c, UCHAR_ALPHABETIC) || (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0;
}

bool is_joiner(UChar32 c) { return c == 0x200C || c == 0x200D; }

bool is_unsegmented_script(UScriptCode script) {
    return script == USCRIPT_HAN || script == USCRIPT_HIRAGANA ||
           script == USCRIPT_KATAKANA || script == USCRIPT_THAI;
}

void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
    if (!error) {
        out.append(buf, static_cast<std::size_t>(len));
    }
}

class Tokenizer {
public:
    explicit Tokenizer(bool unsegmented) : unsegmented_(unsegmented) {}

    void feed(UChar32 c) {
        if (is_joiner(c)) {
            if (run_ == Run::Word) {
                append_utf8(word_, c);
            }
            return;
        }
        Run kind;
        if (u_isdigit(c)) {
            kind = unsegmented_ ? Run::Digits : Run::Word;
        } else if (is_letter(c)) {
            kind = Run::Word;
            if (unsegmented_) {
                UErrorCode status = U_ZERO_ERROR;
                const UScriptCode script = uscript_getScript(c, &status);
                if (is_unsegmented_script(script)) {
                    kind = Run::Unsegmented;
                } else if ((script == USCRIPT_COMMON || script == USCRIPT_INHERITED) &&
                           run_ == Run::Unsegmented) {
                    kind = Run::Unsegmented;
                }
            }
        } else {
            flush();
            return;
        }
        if (kind != run_) {
            flush();
            run_ = kind;
        }
        if (kind == Run::Unsegmented) {
            std::string ch;
            append_utf8(ch, u_foldCase(c, U_FOLD_CASE_DEFAULT));
            chars_.push_back(std::move(ch));
        } else {
            append_utf8(word_, u_foldCase(c, U_FOLD_CASE_DEFAULT));
        }
    }

    std::vector<std::string> finish() {
        flush();
        return std::move(tokens_);
    }

private:
    void flush() {
        if (run_ == Run::Unsegmented) {
            if (chars_.size() == 1) {
                tokens_.push_back(chars_.front());
            }
            for (std::size_t i = 0; i + 1 < chars_.size(); ++i) {
                tokens_.push_back(chars_[i] + chars_[i + 1]);
            }
            chars_.clear();
        } else if (!word_.empty()) {
            tokens_.push_back(std::move(word_));
            word_.clear();
        }
        run_ = Run::None;
    }

    bool unsegmented_;
    Run run_ = Run::None;
    std::string word_;
    std::vector<std::string> chars_;
    std::vector<std::string> tokens_;
};

}  // namespace

std::vector<std::string> tokenize(std::string_view text, std::string_view language) {
    Tokenizer tokenizer(is_unsegmented_language(language));
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) {
            tokenizer.feed(U' ');  // invalid byte sequence acts as a separator
            continue;
        }
        tokenizer.feed(c);
    }
    return tokenizer.finish();
}

}  // namespace factgap
