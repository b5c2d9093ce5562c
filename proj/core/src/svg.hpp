#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mlci::svg {

/// Fixed two-decimal coordinate, never "-0.00".
std::string num(double v);
std::string escape(std::string_view text);

/// Evenly spaced 1-2-5 ticks covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 5);
/// Short tick label ("0.5", "10", "1e+03").
std::string tick_label(double v);

struct Frame {
    double width = 640.0;
    double height = 400.0;
    double left = 72.0;
    double right = 24.0;
    double top = 36.0;
    double bottom = 52.0;

    double plot_left() const { return left; }
    double plot_right() const { return width - right; }
    double plot_top() const { return top; }
    double plot_bottom() const { return height - bottom; }
};

/// Affine data-to-pixel map for one axis.
struct Scale {
    double d0 = 0.0, d1 = 1.0, p0 = 0.0, p1 = 1.0;
    double operator()(double v) const { return p0 + (v - d0) / (d1 - d0) * (p1 - p0); }
};

/// Pads a degenerate or tight range so that both ends are distinct.
void pad_range(double& lo, double& hi, double fraction = 0.05);

class Document {
public:
    explicit Document(Frame frame);

    void raw(std::string_view element);
    void line(double x0, double y0, double x1, double y1, std::string_view cls);
    void rect(double x, double y, double w, double h, std::string_view cls);
    void circle(double cx, double cy, double r, std::string_view cls, std::string_view style = {});
    void text(double x, double y, std::string_view content, std::string_view cls, std::string_view anchor = "start");
    void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view cls,
                  std::string_view style = {});
    void path(std::string_view d, std::string_view cls, std::string_view style = {});
    void open_group(std::string_view cls);
    void close_group();

    /// Axis frame, ticks and labels. `ylog` draws decade ticks of a log10 scale.
    void axes(const Scale& x, const std::vector<double>& xticks, const Scale& y, const std::vector<double>& yticks,
              std::string_view xlabel, std::string_view ylabel, bool ylog = false);
    void title(std::string_view text);

    std::string finish() const;

    const Frame& frame() const { return frame_; }

private:
    Frame frame_;
    std::string body_;
};

} // namespace mlci::svg
