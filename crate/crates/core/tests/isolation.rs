mod common;

use common::harness;
use proptest::prelude::*;
use tutor_core::policy::Role;
use tutor_core::provider::MockProvider;
use tutor_core::service::PostMessage;

const QUESTION: &str = "How do I use enumerate in a for loop?";

fn run(order: Vec<usize>, threads: usize) -> Result<(), TestCaseError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap();
    rt.block_on(async {
        let h = harness(MockProvider::replies((0..64).map(|i| format!("reply {i}"))).unwrap());
        let ids: Vec<String> = (0..threads).map(|_| h.service.create_session()).collect();
        let mut handles = Vec::new();
        for (n, t) in order.iter().enumerate() {
            let svc = h.service.clone();
            let id = ids[*t].clone();
            let text = format!("{QUESTION} [thread {t} message {n}]");
            handles.push(tokio::spawn(async move {
                svc.post_message(
                    &id,
                    PostMessage {
                        text,
                        ..Default::default()
                    },
                )
                .await
            }));
            if n % 3 == 0 {
                tokio::task::yield_now().await;
            }
        }
        for handle in handles {
            handle.await.unwrap().unwrap();
        }
        for (t, id) in ids.iter().enumerate() {
            let s = h.service.session_snapshot(id).await.unwrap();
            let expected = order.iter().filter(|x| **x == t).count();
            prop_assert_eq!(s.history.len(), expected * 2);
            for (k, pair) in s.history.chunks(2).enumerate() {
                prop_assert_eq!(pair[0].role, Role::Student);
                let tag = format!("[thread {t} message ");
                prop_assert!(pair[0].text.contains(&tag), "foreign message in thread {}", t);
                prop_assert_eq!(&pair[1].text, &format!("reply {k}"));
            }
        }
        for call in h.mock.calls() {
            let t = ids.iter().position(|id| *id == call.conversation).unwrap();
            let tag = format!("[thread {t} message ");
            prop_assert!(call.bundle.user_message.contains(&tag));
            for turn in &call.bundle.history {
                if turn.role == Role::Student {
                    prop_assert!(turn.text.contains(&tag));
                }
            }
        }
        let records = h.interactions().await;
        prop_assert_eq!(records.len(), order.len());
        for r in &records {
            let t = ids.iter().position(|id| *id == r.thread_id).unwrap();
            let tag = format!("[thread {t} message ");
            prop_assert!(r.prompt_text.contains(&tag));
        }
        Ok(())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interleaved_threads_never_share_history(order in prop::collection::vec(0usize..3, 1..30)) {
        run(order, 3)?;
    }
}
