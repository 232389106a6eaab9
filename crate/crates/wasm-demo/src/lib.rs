//! Browser demo bindings. See `www/index.html` for the page that calls these.
