#[allow(dead_code)]
#[path = "../examples/api_session.rs"]
mod api_session;

#[tokio::test]
async fn api_session_example_runs() {
    api_session::run().await.expect("api_session example should run");
}
