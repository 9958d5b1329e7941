//! Clean base-page templates.
//!
//! Five categories of synthetic but structurally realistic pages: a
//! form-heavy storefront, a content page carrying a benign pop-up, a
//! comment/issue thread, a long-form content page, and an email/message
//! inbox. Every page is deliberately heavy on boilerplate — navigation,
//! styles, analytics scripts, footer link farms, repeated promo cards — so
//! pruning has something real to remove.
//!
//! All content is drawn from fixed benign word pools and a seeded RNG:
//! identical seeds give identical bytes, and no clean page ever contains a
//! phrase from the mock analyzer's coercive lexicon or a duplicated
//! identifier.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

pub const CATEGORIES: &[&str] = &["form-heavy", "popup-bearing", "threads", "content", "inbox"];

const ADJECTIVES: &[&str] = &[
    "amber", "breezy", "calm", "crisp", "dapper", "eager", "fresh", "gentle", "hardy", "ivory",
    "jolly", "keen", "lively", "mellow", "noble", "quiet", "rustic", "sage", "tidy", "woven",
];

const NOUNS: &[&str] = &[
    "basket", "garden", "lantern", "meadow", "orchard", "pebble", "quilt", "river", "saddle",
    "teapot", "valley", "willow", "harbor", "island", "jacket", "kettle", "ledger", "marble",
    "notebook", "satchel",
];

const VERBS: &[&str] = &[
    "brightens", "carries", "follows", "gathers", "holds", "joins", "lifts", "mends", "nudges",
    "opens", "pairs", "rests", "shares", "steadies", "tends", "warms",
];

const PEOPLE: &[&str] = &[
    "Avery", "Blair", "Casey", "Devon", "Ellis", "Finley", "Harper", "Jordan", "Kendall",
    "Logan", "Morgan", "Parker", "Quinn", "Reese", "Rowan", "Sawyer",
];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    format!(
        "The {} {} {} the {} {}.",
        pick(rng, ADJECTIVES),
        pick(rng, NOUNS),
        pick(rng, VERBS),
        pick(rng, ADJECTIVES),
        pick(rng, NOUNS),
    )
}

fn paragraph(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    (0..sentences)
        .map(|_| sentence(rng))
        .collect::<Vec<_>>()
        .join(" ")
}

fn title_words(rng: &mut ChaCha8Rng) -> String {
    let a = pick(rng, ADJECTIVES);
    let n = pick(rng, NOUNS);
    let mut out = String::new();
    for word in [a, n] {
        let mut chars = word.chars();
        if let Some(first) = chars.next() {
            out.push(first.to_ascii_uppercase());
            out.push_str(chars.as_str());
            out.push(' ');
        }
    }
    out.trim_end().to_string()
}

/// Page-scoped identifier mint: every id/name this page uses is unique.
struct IdMint {
    next: usize,
}

impl IdMint {
    fn new() -> Self {
        IdMint { next: 0 }
    }

    fn mint(&mut self, stem: &str) -> String {
        let id = format!("{stem}-{}", self.next);
        self.next += 1;
        id
    }
}

fn style_block() -> String {
    let mut css = String::from("\n    :root { --ink: #1f2430; --paper: #fcfbf7; --line: #d8d4c8; }\n    body { margin: 0; font-family: Georgia, serif; color: var(--ink); background: var(--paper); }\n");
    let selectors = [
        "header.masthead", ".nav-list", ".nav-item", ".nav-item a", "main.page", ".hero",
        ".hero h1", ".promo-grid", ".promo-card", ".promo-card h3", ".promo-card p",
        ".content-col", ".side-col", ".form-panel", ".form-panel label", ".form-panel input",
        ".form-panel button", ".thread", ".card", ".comment__body", ".replies", ".description",
        ".email-list", ".email-item", ".email-header", ".email-body", ".chat-panel", ".message",
        "footer.colophon", ".footer-links", ".footer-link", ".legal", ".crumbs", ".badge",
        ".pull-quote", ".byline", ".meta-row", ".search-panel", ".newsletter-panel", ".chart-wrap",
    ];
    for (i, sel) in selectors.iter().enumerate() {
        let _ = write!(
            css,
            "    {sel} {{ padding: {}px {}px; margin: {}px auto; border: 1px solid var(--line); border-radius: {}px; line-height: 1.{}; letter-spacing: 0.0{}em; }}\n",
            4 + i % 9,
            6 + i % 7,
            2 + i % 11,
            2 + i % 5,
            3 + i % 6,
            1 + i % 4,
        );
    }
    css.push_str("    @media (max-width: 640px) { .promo-grid { display: block; } .side-col { display: none; } .nav-list { flex-wrap: wrap; } }\n  ");
    css
}

fn analytics_script(rng: &mut ChaCha8Rng) -> String {
    let session = rng.random_range(100_000..999_999i64);
    let sample = rng.random_range(3..17i64);
    format!(
        "\n    (function () {{\n      var session = 'sess-{session}';\n      var beacons = [];\n      function record(kind, detail) {{\n        beacons.push({{ kind: kind, detail: detail, at: Date.now(), session: session }});\n        if (beacons.length > {sample}) {{ beacons.shift(); }}\n      }}\n      ['click', 'scroll', 'visibilitychange'].forEach(function (evt) {{\n        window.addEventListener(evt, function () {{ record(evt, document.title); }});\n      }});\n      window.__pageMetrics = {{ flush: function () {{ var out = beacons.slice(); beacons = []; return out; }} }};\n      record('load', location.pathname);\n    }})();\n  "
    )
}

fn widget_script(rng: &mut ChaCha8Rng) -> String {
    let step = rng.random_range(2..9i64);
    format!(
        "\n    (function () {{\n      var ticker = 0;\n      var labels = document.querySelectorAll('[data-rotate]');\n      function rotate() {{\n        ticker = (ticker + {step}) % 360;\n        for (var i = 0; i < labels.length; i += 1) {{\n          labels[i].setAttribute('data-angle', String(ticker));\n        }}\n      }}\n      setInterval(rotate, 4000);\n      rotate();\n    }})();\n  "
    )
}

fn nav_block(rng: &mut ChaCha8Rng, mint: &mut IdMint) -> String {
    let mut out = String::from("<header class=\"masthead\"><nav aria-label=\"primary\"><ul class=\"nav-list\">");
    for _ in 0..38 {
        let word = pick(rng, NOUNS);
        let label = title_words(rng);
        let id = mint.mint("nav");
        let _ = write!(
            out,
            "<li class=\"nav-item\"><a id=\"{id}\" href=\"/dept/{word}/{id}\">{label}</a></li>"
        );
    }
    out.push_str("</ul></nav></header>");
    out
}

fn footer_block(rng: &mut ChaCha8Rng, mint: &mut IdMint) -> String {
    let mut out =
        String::from("<footer class=\"colophon\"><ul class=\"footer-links\">");
    for _ in 0..46 {
        let word = pick(rng, NOUNS);
        let label = title_words(rng);
        let id = mint.mint("foot");
        let _ = write!(
            out,
            "<li class=\"footer-link\"><a id=\"{id}\" href=\"/help/{word}/{id}\">{label}</a></li>"
        );
    }
    out.push_str("</ul><p class=\"legal\">All catalog descriptions on this page are fictional and provided for layout review only.</p></footer>");
    out
}

fn promo_grid(rng: &mut ChaCha8Rng, mint: &mut IdMint, cards: usize) -> String {
    let mut out = String::from("<section class=\"promo-grid\">");
    for _ in 0..cards {
        let id = mint.mint("promo");
        let _ = write!(
            out,
            "<article class=\"promo-card\" id=\"{id}\"><h3>{}</h3><p>{}</p><a href=\"/offers/{id}\">See details</a></article>",
            title_words(rng),
            paragraph(rng, 2),
        );
    }
    out.push_str("</section>");
    out
}

fn page_shell(
    rng: &mut ChaCha8Rng,
    mint: &mut IdMint,
    title: &str,
    main: &str,
    extra_head: &str,
) -> String {
    let style = style_block();
    let analytics = analytics_script(rng);
    let widget = widget_script(rng);
    let nav = nav_block(rng, mint);
    let footer = footer_block(rng, mint);
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><meta name=\"viewport\" content=\"width=device-width, initial-scale=1\"><title>{title}</title><style>{style}</style>{extra_head}</head><body>{nav}<main class=\"page\">{main}</main>{footer}<script>{analytics}</script><script>{widget}</script></body></html>\n"
    )
}

fn form_heavy(rng: &mut ChaCha8Rng) -> String {
    let mut mint = IdMint::new();
    let title = format!("{} Outfitters — Checkout", title_words(rng));
    let mut main = String::new();
    let _ = write!(
        main,
        "<section class=\"hero\"><h1>Order review</h1><p>{}</p></section>",
        paragraph(rng, 3)
    );
    let _ = write!(
        main,
        "<form id=\"site-search\" class=\"search-panel\" action=\"/search\" role=\"search\">\
         <label>Search the catalog<input type=\"search\" name=\"{}\" placeholder=\"Search products\"></label>\
         <button type=\"submit\">Search</button></form>",
        mint.mint("query")
    );
    main.push_str(
        "<form id=\"checkout-form\" class=\"form-panel\" action=\"/checkout/submit\" method=\"post\">\
         <h2>Payment details</h2>\
         <label>Name on card<input type=\"text\" name=\"holder-name\" placeholder=\"Full name\"></label>\
         <label>Card number<input type=\"text\" name=\"card-number\" placeholder=\"0000 0000 0000 0000\"></label>\
         <label>Expiry<input type=\"text\" name=\"card-expiry\" placeholder=\"MM/YY\"></label>\
         <label>Street address<input type=\"text\" name=\"ship-street\" placeholder=\"Street and number\"></label>\
         <label>City<input type=\"text\" name=\"ship-city\" placeholder=\"City\"></label>\
         <label>Postal code<input type=\"text\" name=\"ship-postal\" placeholder=\"Code\"></label>\
         <button type=\"submit\">Place order</button></form>",
    );
    let _ = write!(
        main,
        "<form id=\"newsletter-form\" class=\"newsletter-panel\" action=\"/newsletter\">\
         <label>Seasonal catalog by email<input type=\"email\" name=\"{}\" placeholder=\"you@example.com\"></label>\
         <button type=\"submit\">Subscribe</button></form>",
        mint.mint("subscriber")
    );
    let _ = write!(
        main,
        "<section class=\"content-col\"><h2>Shipping notes</h2><p>{}</p><p>{}</p></section>",
        paragraph(rng, 6),
        paragraph(rng, 5)
    );
    main.push_str(&promo_grid(rng, &mut mint, 10));
    page_shell(rng, &mut mint, &title, &main, "")
}

fn popup_bearing(rng: &mut ChaCha8Rng) -> String {
    let mut mint = IdMint::new();
    let title = format!("{} Journal", title_words(rng));
    let mut main = String::new();
    let _ = write!(
        main,
        "<article class=\"content-col\"><h1>{}</h1><p class=\"byline\">By {}</p><p>{}</p><p>{}</p>\
         <blockquote class=\"pull-quote\">{}</blockquote><p>{}</p></article>",
        title_words(rng),
        pick(rng, PEOPLE),
        paragraph(rng, 7),
        paragraph(rng, 6),
        sentence(rng),
        paragraph(rng, 6),
    );
    main.push_str(&promo_grid(rng, &mut mint, 8));
    // A perfectly ordinary consent banner: extracted as a pop-up, judged
    // clean. Pages in this category exist so pop-up extraction has benign
    // positives to leave alone.
    main.push_str(
        "<div class=\"cookie-banner modal\" id=\"consent-banner\" role=\"dialog\" aria-modal=\"true\" \
         style=\"position: fixed; bottom: 0; left: 0; right: 0; z-index: 1200\">\
         <p>We use cookies to keep your reading list and to measure which articles are read. \
         See the privacy page for the full policy.</p>\
         <button type=\"button\">Accept</button><button type=\"button\">Decline</button></div>",
    );
    page_shell(rng, &mut mint, &title, &main, "")
}

fn threads(rng: &mut ChaCha8Rng) -> String {
    let mut mint = IdMint::new();
    let topic = title_words(rng);
    let title = format!("{topic} — discussion");
    let mut main = String::new();
    let _ = write!(
        main,
        "<section class=\"hero\"><h1>{topic}</h1><p class=\"meta-row\">opened by {} · 14 participants</p></section>\
         <div class=\"description\" id=\"main-post\"><p>{}</p><p>{}</p></div>",
        pick(rng, PEOPLE),
        paragraph(rng, 6),
        paragraph(rng, 4),
    );
    main.push_str("<div class=\"thread\" id=\"comment-thread\">");
    // First top-level comment carries a reply chain three levels deep; the
    // rest are flat. Depth matters to targeted pruning tests.
    let _ = write!(
        main,
        "<div class=\"card\" id=\"{}\"><div class=\"comment__body\"><span class=\"byline\">{}</span> {}</div>\
         <div class=\"replies\"><div class=\"card\" id=\"{}\"><div class=\"comment__body\"><span class=\"byline\">{}</span> {}</div>\
         <div class=\"replies\"><div class=\"card\" id=\"{}\"><div class=\"comment__body\"><span class=\"byline\">{}</span> {}</div></div></div></div></div></div>",
        mint.mint("c"),
        pick(rng, PEOPLE),
        paragraph(rng, 3),
        mint.mint("c"),
        pick(rng, PEOPLE),
        paragraph(rng, 2),
        mint.mint("c"),
        pick(rng, PEOPLE),
        paragraph(rng, 2),
    );
    for _ in 0..4 {
        let _ = write!(
            main,
            "<div class=\"card\" id=\"{}\"><div class=\"comment__body\"><span class=\"byline\">{}</span> {}</div></div>",
            mint.mint("c"),
            pick(rng, PEOPLE),
            paragraph(rng, 3),
        );
    }
    main.push_str("</div>");
    let _ = write!(
        main,
        "<aside class=\"side-col\"><h2>Related threads</h2><p>{}</p></aside>",
        paragraph(rng, 5)
    );
    main.push_str(&promo_grid(rng, &mut mint, 8));
    page_shell(rng, &mut mint, &title, &main, "")
}

fn content(rng: &mut ChaCha8Rng) -> String {
    let mut mint = IdMint::new();
    let title = format!("{} — field notes", title_words(rng));
    let mut main = String::new();
    let _ = write!(
        main,
        "<article class=\"content-col\"><h1>{}</h1><p class=\"byline\">By {} and {}</p>",
        title_words(rng),
        pick(rng, PEOPLE),
        pick(rng, PEOPLE),
    );
    // One deliberately enormous paragraph: the text-truncation rule needs a
    // realistic target.
    let _ = write!(
        main,
        "<h2>Survey</h2><p>{}</p>",
        paragraph(rng, 64)
    );
    let _ = write!(
        main,
        "<h2>Method</h2><p>{}</p><h2>Findings</h2><p>{}</p>",
        paragraph(rng, 7),
        paragraph(rng, 8),
    );
    main.push_str(
        "<div class=\"chart-wrap\"><canvas id=\"chart-canvas\" width=\"480\" height=\"240\">\
         Yearly totals rendered as a bar chart.</canvas></div></article>",
    );
    main.push_str(
        "<script>\n    (function () {\n      var canvas = document.getElementById('chart-canvas');\n      if (!canvas || !canvas.getContext) { return; }\n      var g = canvas.getContext('2d');\n      var totals = [12, 19, 7, 23, 16, 21, 9];\n      for (var i = 0; i < totals.length; i += 1) {\n        g.fillRect(20 + i * 60, 220 - totals[i] * 8, 36, totals[i] * 8);\n      }\n    })();\n  </script>",
    );
    main.push_str(&promo_grid(rng, &mut mint, 10));
    page_shell(rng, &mut mint, &title, &main, "")
}

fn inbox(rng: &mut ChaCha8Rng) -> String {
    let mut mint = IdMint::new();
    let title = "Team workspace — inbox".to_string();
    let mut main = String::new();
    main.push_str("<section class=\"hero\"><h1>Inbox</h1></section><div class=\"email-list\" id=\"email-list\">");
    for _ in 0..5 {
        let id = mint.mint("mail");
        let _ = write!(
            main,
            "<div class=\"email-item\" id=\"{id}\"><div class=\"email-header\">From: {} — {}</div>\
             <div class=\"email-body\"><p>{}</p></div></div>",
            pick(rng, PEOPLE),
            title_words(rng),
            paragraph(rng, 4),
        );
    }
    main.push_str("</div><section class=\"chat-panel\"><h2>Channel</h2><div id=\"chat-history\">");
    for _ in 0..6 {
        let _ = write!(
            main,
            "<div class=\"message\" id=\"{}\"><span class=\"byline\">{}</span> {}</div>",
            mint.mint("msg"),
            pick(rng, PEOPLE),
            paragraph(rng, 2),
        );
    }
    main.push_str("</div></section>");
    let _ = write!(
        main,
        "<form id=\"compose-form\" class=\"form-panel\" action=\"/compose\">\
         <label>To<input type=\"text\" name=\"{}\" placeholder=\"Recipient\"></label>\
         <label>Message<input type=\"text\" name=\"{}\" placeholder=\"Write a reply\"></label>\
         <button type=\"submit\">Send</button></form>",
        mint.mint("to"),
        mint.mint("draft")
    );
    main.push_str(&promo_grid(rng, &mut mint, 8));
    page_shell(rng, &mut mint, &title, &main, "")
}

/// Renders one clean page of the named category from the shared RNG stream.
pub fn render_category(category: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    match category {
        "form-heavy" => Some(form_heavy(rng)),
        "popup-bearing" => Some(popup_bearing(rng)),
        "threads" => Some(threads(rng)),
        "content" => Some(content(rng)),
        "inbox" => Some(inbox(rng)),
        _ => None,
    }
}
