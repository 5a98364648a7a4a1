export { CdfPoint, CsvError, parseCdfCsv, readCdfCsv } from "./csv.js";
export { FigureSpec, figureSvg, render } from "./figure.js";
export { main, parseArgs } from "./cli.js";
