function createServer(handler) {
  var queue = [];
  var active = true;
  return { queue: queue, active: active, handler: handler };
}

function dispatch(server, request) {
  var result = server.handler(request);
  server.queue.push(result);
  return result;
}
