#pragma once

// Shared test fixtures: a small corpus of classical Urdu verse lines (all
// long out of copyright), helpers to lay them out as a corpus directory of
// one-poem-per-file documents, and a scratch-directory guard.

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fixtures {

// One misra per entry; consecutive pairs form couplets.
inline const std::vector<std::string>& ghazal_lines() {
    static const std::vector<std::string> lines = {
        "ہزاروں خواہشیں ایسی کہ ہر خواہش پہ دم نکلے",
        "بہت نکلے مرے ارمان لیکن پھر بھی کم نکلے",
        "دل ناداں تجھے ہوا کیا ہے",
        "آخر اس درد کی دوا کیا ہے",
        "ہم کو ان سے وفا کی ہے امید",
        "جو نہیں جانتے وفا کیا ہے",
        "یہ نہ تھی ہماری قسمت کہ وصال یار ہوتا",
        "اگر اور جیتے رہتے یہی انتظار ہوتا",
        "عشق نے غالب نکما کر دیا",
        "ورنہ ہم بھی آدمی تھے کام کے",
        "دل ہی تو ہے نہ سنگ و خشت درد سے بھر نہ آئے کیوں",
        "روئیں گے ہم ہزار بار کوئی ہمیں ستائے کیوں",
        "پتا پتا بوٹا بوٹا حال ہمارا جانے ہے",
        "جانے نہ جانے گل ہی نہ جانے باغ تو سارا جانے ہے",
        "دکھائی دیے یوں کہ بے خود کیا",
        "ہمیں آپ سے بھی جدا کر چلے",
        "ستاروں سے آگے جہاں اور بھی ہیں",
        "ابھی عشق کے امتحاں اور بھی ہیں",
        "خودی کو کر بلند اتنا کہ ہر تقدیر سے پہلے",
        "خدا بندے سے خود پوچھے بتا تیری رضا کیا ہے",
        "نہیں تیرا نشیمن قصر سلطانی کے گنبد پر",
        "تو شاہیں ہے بسیرا کر پہاڑوں کی چٹانوں میں",
        "سارے جہاں سے اچھا ہندوستاں ہمارا",
        "ہم بلبلیں ہیں اس کی یہ گلستاں ہمارا",
    };
    return lines;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("ghazalforge-test-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

/// Lay out n_docs couplet files, cycling through the verse lines. File names
/// sort in creation order.
inline void write_corpus(const std::filesystem::path& dir, std::size_t n_docs) {
    const auto& lines = ghazal_lines();
    const std::size_t couplets = lines.size() / 2;
    for (std::size_t d = 0; d < n_docs; ++d) {
        const std::size_t c = d % couplets;
        char name[32];
        std::snprintf(name, sizeof name, "doc%03zu.txt", d);
        write_file(dir / name, lines[2 * c] + "\n" + lines[2 * c + 1] + "\n");
    }
}

}  // namespace fixtures
