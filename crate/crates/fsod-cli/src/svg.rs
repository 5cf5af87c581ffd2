//! Minimal self-contained SVG bar chart for relative-mAP reports: one group
//! per split, baseline and few-shot bars side by side, RmAP percentage
//! printed over the few-shot bar.

use fsod_core::eval::RmapReport;

const BAR_WIDTH: f64 = 48.0;
const GROUP_GAP: f64 = 42.0;
const PLOT_HEIGHT: f64 = 240.0;
const MARGIN_LEFT: f64 = 46.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 44.0;

pub fn rmap_bar_chart(report: &RmapReport) -> String {
    let groups = report.entries.len();
    let group_width = 2.0 * BAR_WIDTH + GROUP_GAP;
    let width = MARGIN_LEFT + groups as f64 * group_width + GROUP_GAP;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let baseline_y = MARGIN_TOP + PLOT_HEIGHT;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n"
    ));

    // y axis: mAP from 0 to 1 with gridlines every 0.25
    for step in 0..=4 {
        let value = step as f64 * 0.25;
        let y = baseline_y - value * PLOT_HEIGHT;
        svg.push_str(&format!(
            "  <line x1=\"{MARGIN_LEFT:.0}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\"/>\n",
            width - GROUP_GAP / 2.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" fill=\"#444444\">{value:.2}</text>\n",
            MARGIN_LEFT - 6.0,
            y + 4.0
        ));
    }

    for (i, entry) in report.entries.iter().enumerate() {
        let group_x = MARGIN_LEFT + GROUP_GAP + i as f64 * group_width;
        let bars = [
            (group_x, entry.map_baseline, "#9aa0a6", "baseline"),
            (group_x + BAR_WIDTH, entry.map_fsod, "#4878cf", "few-shot"),
        ];
        for (x, value, color, _) in bars {
            let clamped = value.clamp(0.0, 1.0);
            let bar_height = clamped * PLOT_HEIGHT;
            let y = baseline_y - bar_height;
            svg.push_str(&format!(
                "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{BAR_WIDTH:.0}\" \
                 height=\"{bar_height:.1}\" fill=\"{color}\"/>\n"
            ));
            svg.push_str(&format!(
                "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#222222\">{value:.2}</text>\n",
                x + BAR_WIDTH / 2.0,
                y - 4.0
            ));
        }
        // RmAP percentage over the few-shot bar
        let fsod_height = entry.map_fsod.clamp(0.0, 1.0) * PLOT_HEIGHT;
        let label_y = baseline_y - fsod_height / 2.0;
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"white\" \
             font-weight=\"bold\">{:+.1}%</text>\n",
            group_x + 1.5 * BAR_WIDTH,
            label_y,
            entry.rmap_percent
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#222222\">{}</text>\n",
            group_x + BAR_WIDTH,
            baseline_y + 18.0,
            entry.label
        ));
    }

    // legend
    svg.push_str(&format!(
        "  <rect x=\"{MARGIN_LEFT:.0}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"#9aa0a6\"/>\n",
        height - 18.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#222222\">baseline</text>\n",
        MARGIN_LEFT + 16.0,
        height - 8.0
    ));
    svg.push_str(&format!(
        "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"#4878cf\"/>\n",
        MARGIN_LEFT + 90.0,
        height - 18.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#222222\">few-shot</text>\n",
        MARGIN_LEFT + 106.0,
        height - 8.0
    ));
    svg.push_str("</svg>\n");
    svg
}
