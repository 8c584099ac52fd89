function route(path, handler) {
  var entry = { path: path, handler: handler };
  registry.push(entry);
  return entry;
}

var registry = [];
