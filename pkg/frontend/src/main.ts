/**
 * Entry script: boot against the origin that served the page.
 */

import { bootApp, optionsFromQuery } from "./app.js";

bootApp(document, "", optionsFromQuery(window.location.search));
